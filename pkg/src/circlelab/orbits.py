"""Orbit algebra of break points.

Break points are grouped into maximal connections (blocks of one orbit),
per-orbit jump products decide the set of singular orbits and the
trivial-product property, and a piecewise-quadratic conjugation transfers
a jump one orbit step at a time. The transfer adjuster fixes its center
and support endpoints, so tracked break coordinates never move; only
jumps change, plus a trivial-product artifact pair at each support edge.
"""

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

from mpmath import mp, mpf

from .errors import (
    AmbiguousMatch,
    InfeasibleSlopes,
    InvariantViolation,
    SupportCollision,
)
from .maps import (
    PiecewiseMap,
    compose,
    is_exact,
    orbit as forward_orbit,
    backward_orbit,
    piecewise_from_arcs,
    to_mpf,
)
from .precision import small_arc

EXACT_PRODUCT_TOL = mpf("1e-12")
FLOAT_PRODUCT_TOL = mpf("1e-8")


def same_orbit(f, c, d, max_iter, tol):
    """Smallest signed offset k with |f^k(c) - d| < tol, or None.

    tol should be below half the minimal gap of a partition deep enough
    to separate the candidate orbit points; two distinct matching offsets
    raise AmbiguousMatch.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    c, d = to_mpf(c), to_mpf(d)
    fwd = forward_orbit(f, c, max_iter + 1)
    bwd = backward_orbit(f, c, max_iter + 1)
    matches = []
    for k in range(max_iter + 1):
        if small_arc(fwd[k], d) < tol:
            matches.append(k)
        if k > 0 and small_arc(bwd[k], d) < tol:
            matches.append(-k)
    if not matches:
        return None
    if len(matches) > 1:
        raise AmbiguousMatch(f"offsets {matches} all match within {mp.nstr(tol, 4)}")
    return matches[0]


@dataclass
class OrbitConnection:
    representative: mpf
    members: list  # (offset from representative, BreakPoint), offsets ascending
    product: object

    @property
    def window(self):
        offs = [k for k, _ in self.members]
        return (min(offs), max(offs))

    def is_singular(self):
        return not _product_trivial(self.product)


def _product_trivial(product):
    if is_exact(product):
        return Fraction(product) == 1
    return abs(mp.log(to_mpf(product))) <= FLOAT_PRODUCT_TOL


def _product_mul(a, b):
    if is_exact(a) and is_exact(b):
        return Fraction(a) * Fraction(b)
    return to_mpf(a) * to_mpf(b)


@dataclass
class OrbitReport:
    connections: list
    d_property: bool
    total_product: object

    @property
    def singular_connections(self):
        return [c for c in self.connections if c.is_singular()]

    def pi_per_orbit(self):
        return {float(c.representative): c.product for c in self.connections}

    def to_json_dict(self):
        return {
            "connections": [
                {
                    "representative": mp.nstr(c.representative, 30),
                    "offsets": [k for k, _ in c.members],
                    "jumps": [str(b.jump) for _, b in c.members],
                    "product": str(c.product),
                    "singular": c.is_singular(),
                }
                for c in self.connections
            ],
            "d_property": self.d_property,
            "total_product": str(self.total_product),
        }


def analyze_orbits(f, max_iter, tol):
    """Group breaks into maximal connections and take per-orbit jump products."""
    breaks = sorted(f.break_points(), key=lambda b: b.location_mpf)
    n = len(breaks)
    offsets = {i: {i: 0} for i in range(n)}
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i, j in itertools.combinations(range(n), 2):
        k = same_orbit(f, breaks[i].location_mpf, breaks[j].location_mpf, max_iter, tol)
        if k is None:
            continue
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
        offsets[i][j] = k

    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    connections = []
    for root, members in groups.items():
        # propagate offsets from the root through known pairs
        rel = {root: 0}
        changed = True
        while changed and len(rel) < len(members):
            changed = False
            for i in members:
                for j, k in offsets[i].items():
                    if i in rel and j not in rel:
                        rel[j] = rel[i] + k
                        changed = True
                    elif j in rel and i not in rel:
                        rel[i] = rel[j] - k
                        changed = True
        base = min(rel.values())
        anchor = next(i for i in members if rel[i] == base)
        pairs = sorted(((rel[i] - base, breaks[i]) for i in members), key=lambda t: t[0])
        product = pairs[0][1].jump
        for _, b in pairs[1:]:
            product = _product_mul(product, b.jump)
        connections.append(OrbitConnection(breaks[anchor].location_mpf, pairs, product))

    connections.sort(key=lambda c: c.representative)
    total = Fraction(1)
    for b in breaks:
        total = _product_mul(total, b.jump)
    d_property = all(not c.is_singular() for c in connections)
    return OrbitReport(connections, d_property, total)


# -- quadratic adjusters -------------------------------------------------------


@dataclass
class QuadraticAdjuster:
    """Identity outside [center-radius, center+radius]; one quadratic arc per side.

    Fixes center and both support endpoints, with one-sided derivative
    ratio target_jump at the center. Support endpoints carry their own
    (trivial-product-pair) derivative kinks: a single quadratic through
    two fixed points cannot also match slope 1 at the outer end.
    """

    center: object
    radius: object
    target_jump: object
    s_minus: object
    s_plus: object
    map: PiecewiseMap

    def support(self):
        c, d = to_mpf(self.center), to_mpf(self.radius)
        return (c - d, c + d)


def adjuster_slopes(sigma):
    """Slope rule keeping both one-sided derivatives inside (0, 2)."""
    if is_exact(sigma):
        sigma = Fraction(sigma)
        if sigma == 1:
            return Fraction(1), Fraction(1)
        s_plus = min(Fraction(1), Fraction(2) / (1 + sigma)) * Fraction(63, 64)
    else:
        sigma = to_mpf(sigma)
        if sigma == 1:
            return mpf(1), mpf(1)
        s_plus = min(mpf(1), 2 / (1 + sigma)) * mpf(63) / 64
    s_minus = sigma * s_plus
    if not (0 < s_plus < 2 and 0 < s_minus < 2):
        raise InfeasibleSlopes(f"sigma={sigma} gives slopes ({s_minus}, {s_plus})")
    return s_minus, s_plus


def make_adjuster(c, delta, sigma, s_plus=None):
    """Quadratic adjuster with jump sigma at c, supported on [c-delta, c+delta]."""
    if to_mpf(delta) <= 0 or to_mpf(delta) >= mpf("0.25"):
        raise InvariantViolation("radius must lie in (0, 1/4)")
    if s_plus is None:
        s_minus, s_plus = adjuster_slopes(sigma)
    else:
        s_minus = sigma * s_plus
        if not (0 < to_mpf(s_plus) < 2 and 0 < to_mpf(s_minus) < 2):
            raise InfeasibleSlopes(f"explicit s_plus={s_plus} leaves (0,2)")
    if (is_exact(sigma) and Fraction(sigma) == 1) or to_mpf(sigma) == 1:
        identity = PiecewiseMap([_identity_piece()])
        return QuadraticAdjuster(c, delta, sigma, s_minus, s_plus, identity)
    if not all(is_exact(v) for v in (c, delta, s_minus, s_plus)):
        c, delta = to_mpf(c), to_mpf(delta)
        s_minus, s_plus = to_mpf(s_minus), to_mpf(s_plus)
    a = (s_minus - 1) / delta
    b = (1 - s_plus) / delta
    left_lo, left_hi = c - delta, c
    right_lo, right_hi = c, c + delta
    left_poly = (a * left_lo * left_hi, 1 - a * (left_lo + left_hi), a)
    right_poly = (b * right_lo * right_hi, 1 - b * (right_lo + right_hi), b)
    arcs = [
        (left_lo, left_hi, left_poly),
        (right_lo, right_hi, right_poly),
        (right_hi, left_lo + 1, (_zero_like(c), _one_like(c), _zero_like(c))),
    ]
    kmap = piecewise_from_arcs(arcs)
    adj = QuadraticAdjuster(c, delta, sigma, s_minus, s_plus, kmap)
    _verify_adjuster(adj)
    return adj


def _identity_piece():
    from .maps import Piece

    return Piece(Fraction(0), (Fraction(0), Fraction(1), Fraction(0)))


def _zero_like(c):
    return Fraction(0) if is_exact(c) else mpf(0)


def _one_like(c):
    return Fraction(1) if is_exact(c) else mpf(1)


def _verify_adjuster(adj):
    k, c, d = adj.map, to_mpf(adj.center), to_mpf(adj.radius)
    tol = mpf(2) ** (16 - mp.prec)
    for x in (c - d, c, c + d):
        if small_arc(k.evaluate(x), x % 1) > tol:
            raise InvariantViolation("adjuster fails to fix its anchor points")
    dl, dr = k.one_sided_derivatives(c % 1)
    ratio = _product_mul(dl, _inv_product(dr))
    target = adj.target_jump
    if is_exact(ratio) and is_exact(target):
        if Fraction(ratio) != Fraction(target):
            raise InvariantViolation("adjuster jump is off target")
    elif abs(mp.log(to_mpf(ratio) / to_mpf(target))) > tol:
        raise InvariantViolation("adjuster jump is off target")
    if k.derivative_bounds()[0] <= 0:
        raise InvariantViolation("adjuster not monotone")


def _inv_product(a):
    if is_exact(a):
        return Fraction(1) / Fraction(a)
    return 1 / to_mpf(a)


# -- jump transfer and reduction ----------------------------------------------


def conjugate_by_adjuster(f, center, sigma, delta, extra_allowed=()):
    """K o f o K^-1 for the adjuster K with jump sigma at center.

    Support collisions with other breaks or their image windows raise;
    centers may coincide with an existing break (that is how jumps merge).
    """
    center = to_mpf(center)
    breaks = f.break_points()
    allowed = {center} | {to_mpf(a) for a in extra_allowed}
    _check_support(f, breaks, center, delta, allowed=allowed)
    adj = make_adjuster(center, delta, sigma)
    inner = compose(adj.map, f)
    return compose(inner, adj.map.invert()), adj


def transfer_jump(f, c, direction, delta):
    """Move the break at c one orbit step via conjugation by an adjuster.

    direction +1 removes the break at c and multiplies its jump into
    f(c); -1 moves it onto f^-1(c). Returns (F, adjuster) with
    F = K o f o K^-1. Tracked break coordinates are fixed points of K.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    c = to_mpf(c)
    breaks = f.break_points()
    src = _break_at(breaks, c)
    if src is None:
        raise InvariantViolation("c is not a break point of f")
    sigma = src.jump
    if direction == 1:
        center = f.evaluate(c)
        kappa = _inv_product(sigma)
        landing = center
    else:
        center = c
        kappa = sigma
        landing = f.invert().evaluate(c)
    big, adj = conjugate_by_adjuster(f, center, kappa, delta, extra_allowed={c})
    _verify_transfer(big, src, c, landing, breaks)
    return big, adj


def _break_at(breaks, c, tol=None):
    if tol is None:
        tol = mpf(2) ** (24 - mp.prec)
    for b in breaks:
        if small_arc(b.location_mpf, c) <= tol:
            return b
    return None


def _check_support(f, breaks, center, delta, allowed):
    delta = to_mpf(delta)
    center = to_mpf(center)
    f_inv = f.invert()
    img_lo, img_hi = f.evaluate(center - delta), f.evaluate(center + delta)
    pre_lo, pre_hi = f_inv.evaluate(center - delta), f_inv.evaluate(center + delta)
    if small_arc(f.evaluate(center), center) <= 2 * delta:
        raise SupportCollision("support meets its own forward image")
    if small_arc(f_inv.evaluate(center), center) <= 2 * delta:
        raise SupportCollision("support meets its own backward image")
    for b in breaks:
        loc = b.location_mpf
        if any(small_arc(loc, a) <= mpf(2) ** (24 - mp.prec) for a in allowed):
            continue
        if small_arc(loc, center) <= delta:
            raise SupportCollision(f"break at {mp.nstr(loc, 10)} inside the support")
        if small_arc(f.evaluate(loc), center) <= delta:
            raise SupportCollision(f"image of break {mp.nstr(loc, 10)} inside the support")


def _verify_transfer(big, src, c, landing, old_breaks):
    resid = abs(mp.log(to_mpf(big.jump_at(c))))
    if resid > mpf("1e-12"):
        raise InvariantViolation(f"transferred break left residual {mp.nstr(resid, 5)} at source")
    target = _break_at(old_breaks, landing)
    expected = _product_mul(src.jump, target.jump) if target is not None else src.jump
    got = big.jump_at(landing)
    err = abs(mp.log(to_mpf(got) / to_mpf(expected)))
    if err > mpf("1e-12"):
        raise InvariantViolation(f"landing jump off by {mp.nstr(err, 5)} in log")


@dataclass
class ReductionResult:
    map: object
    chain: list  # QuadraticAdjuster per unit transfer, in application order
    certificate: dict


def reduce_to_distinct_orbits(f, max_iter, tol, delta_fraction=Fraction(1, 8)):
    """Collapse every maximal connection to at most one break.

    Walks each connection's earliest break forward one orbit step at a
    time, merging jumps as it lands on later members. The certificate
    pairs each original per-orbit product with the final jump and lists
    the trivial artifact pairs created at adjuster support edges.
    """
    report = analyze_orbits(f, max_iter, tol)
    current = f
    chain = []
    entries = []
    for conn in report.connections:
        offs = [k for k, _ in conn.members]
        locs = [b.location_mpf for _, b in conn.members]
        if len(offs) == 1:
            entries.append(
                {
                    "representative": conn.representative,
                    "pi": conn.product,
                    "final_location": locs[0],
                    "final_jump": conn.members[0][1].jump,
                    "transfers": 0,
                }
            )
            continue
        walk = locs[0]
        steps = 0
        for stop in range(1, len(offs)):
            for _ in range(offs[stop] - offs[stop - 1]):
                delta = _pick_radius(current, walk, delta_fraction)
                current, adj = transfer_jump(current, walk, +1, delta)
                chain.append(adj)
                walk = adj.center if isinstance(adj.center, mpf) else to_mpf(adj.center)
                steps += 1
        final_jump = current.jump_at(walk)
        entries.append(
            {
                "representative": conn.representative,
                "pi": conn.product,
                "final_location": walk,
                "final_jump": final_jump,
                "transfers": steps,
            }
        )
        if _product_trivial(conn.product):
            # the connection should have vanished entirely
            for loc in locs:
                resid = abs(mp.log(to_mpf(current.jump_at(loc))))
                if resid > mpf("1e-10"):
                    raise InvariantViolation(
                        f"trivial connection left jump residual {mp.nstr(resid, 5)}"
                    )
        else:
            err = abs(mp.log(to_mpf(final_jump) / to_mpf(conn.product)))
            if err > mpf("1e-12"):
                raise InvariantViolation(f"final jump off per-orbit product by {mp.nstr(err, 5)}")
    certificate = {
        "orbits": entries,
        "artifact_pairs": [
            {
                "center": mp.nstr(to_mpf(adj.center), 25),
                "support": [mp.nstr(x, 25) for x in adj.support()],
            }
            for adj in chain
        ],
    }
    return ReductionResult(current, chain, certificate)


def _pick_radius(f, center, fraction):
    center = to_mpf(center)
    f_inv = f.invert()
    dists = [small_arc(f.evaluate(center), center), small_arc(f_inv.evaluate(center), center)]
    for b in f.break_points():
        d = small_arc(b.location_mpf, center)
        if d > mpf(2) ** (24 - mp.prec):
            dists.append(d)
            dists.append(small_arc(f.evaluate(b.location_mpf), center))
    raw = min(dists) * to_mpf(fraction)
    return min(raw, mpf("0.05"))


# -- break equivalence ---------------------------------------------------------


@dataclass
class BreakEquivalence:
    equivalent: bool
    witness: dict
    matches: list = field(default_factory=list)


def break_equivalent(f, g, h, max_iter, tol):
    """Does h match singular orbits of f onto those of g with equal products?

    h is anything evaluable on circle points (a conjugacy table or an
    explicit map). The witness names the first violated orbit.
    """
    rf = analyze_orbits(f, max_iter, tol)
    rg = analyze_orbits(g, max_iter, tol)
    sf, sg = rf.singular_connections, rg.singular_connections
    if len(sf) != len(sg):
        return BreakEquivalence(
            False, {"reason": "cardinality", "card_f": len(sf), "card_g": len(sg)}
        )
    used = set()
    matches = []
    for conn in sf:
        hc = h.evaluate(conn.representative)
        hit = None
        for j, gconn in enumerate(sg):
            if j in used:
                continue
            k = same_orbit(g, hc, gconn.representative, max_iter, tol)
            if k is not None:
                hit = (j, k)
                break
        if hit is None:
            return BreakEquivalence(
                False,
                {"reason": "unmatched_orbit", "f_representative": float(conn.representative)},
                matches,
            )
        j, k = hit
        used.add(j)
        if not _products_agree(conn.product, sg[j].product):
            return BreakEquivalence(
                False,
                {
                    "reason": "product_mismatch",
                    "f_representative": float(conn.representative),
                    "pi_f": str(conn.product),
                    "pi_g": str(sg[j].product),
                },
                matches,
            )
        matches.append({"f": float(conn.representative), "g": float(sg[j].representative), "offset": k})
    return BreakEquivalence(True, {}, matches)


def _products_agree(a, b):
    if is_exact(a) and is_exact(b):
        return Fraction(a) == Fraction(b)
    return abs(mp.log(to_mpf(a)) - mp.log(to_mpf(b))) <= FLOAT_PRODUCT_TOL


# -- the jump linear system ----------------------------------------------------


@dataclass
class JumpSystem:
    """0/1 matrix of shape ((q+1)^2, q+1) from the pairwise product relations.

    Row l = k + i(q+1) carries 1 in column i and 0 in column k when
    i != k; rows with i = k are zero; remaining entries are free.
    """

    q: int
    matrix: list

    def validate(self):
        size = self.q + 1
        if len(self.matrix) != size * size or any(len(r) != size for r in self.matrix):
            raise InvariantViolation("jump system shape is wrong")
        for i in range(size):
            for k in range(size):
                row = self.matrix[k + i * size]
                if i == k:
                    if any(row):
                        raise InvariantViolation(f"diagonal row ({i},{k}) must vanish")
                else:
                    if row[i] != 1 or row[k] != 0:
                        raise InvariantViolation(f"row ({i},{k}) violates forced entries")
        return True


def free_positions(q):
    size = q + 1
    return [
        (i, k, j)
        for i in range(size)
        for k in range(size)
        for j in range(size)
        if i != k and j != i and j != k
    ]


def jump_system(q, filling=None):
    """Build the system with the given {(i,k,j): 0/1} free-entry filling."""
    size = q + 1
    filling = filling or {}
    matrix = [[0] * size for _ in range(size * size)]
    for i in range(size):
        for k in range(size):
            if i == k:
                continue
            row = matrix[k + i * size]
            row[i] = 1
            row[k] = 0
            for j in range(size):
                if j not in (i, k):
                    row[j] = int(filling.get((i, k, j), 0))
    system = JumpSystem(q, matrix)
    system.validate()
    return system


def exact_rank(matrix):
    """Rank over the rationals by fraction-free integer elimination."""
    m = [list(r) for r in matrix if any(r)]
    if not m:
        return 0
    cols = len(m[0])
    rank = 0
    for col in range(cols):
        piv = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        lead = m[rank]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                a, b = lead[col], m[r][col]
                m[r] = [a * x - b * y for x, y in zip(m[r], lead)]
        rank += 1
        if rank == min(cols, len(m)):
            break
    return rank


def jump_system_nullspace(system):
    """(rank, kernel dimension) over the rationals, exactly."""
    system.validate()
    rank = exact_rank(system.matrix)
    return rank, (system.q + 1) - rank


def verify_rank(q, sample_count=None, seed=0):
    """Check rank = q+1 over admissible fillings, exhaustively or sampled."""
    positions = free_positions(q)
    ranks = []
    if sample_count is None:
        if len(positions) > 24:
            raise ValueError("too many free entries for exhaustive enumeration")
        for bits in itertools.product((0, 1), repeat=len(positions)):
            filling = dict(zip(positions, bits))
            ranks.append(jump_system_nullspace(jump_system(q, filling))[0])
        checked = 2 ** len(positions)
    else:
        rng = random.Random(seed)
        for _ in range(sample_count):
            filling = {pos: rng.randint(0, 1) for pos in positions}
            ranks.append(jump_system_nullspace(jump_system(q, filling))[0])
        checked = sample_count
    return {
        "q": q,
        "fillings": checked,
        "min_rank": min(ranks),
        "max_rank": max(ranks),
        "all_full_rank": min(ranks) == q + 1,
    }
