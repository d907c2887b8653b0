"""Ratio distortion, bound verifiers, cells, and break classification.

The ratio of an ordered triple is the quotient of its two gaps; the ratio
distortion of a map on a triple compares image ratio to source ratio.
Along closest-return times the distortion of a tiny triple near a break's
backward orbit picks up exactly the jumps whose preimages enter the
window, which is what the trace operation measures. Everything here is a
finite check at one depth: the bound constants are recorded next to every
verdict so a failed level reports which inequality broke first.
"""

import random
from dataclasses import dataclass, field
from fractions import Fraction

from mpmath import mp, mpf

from .errors import (
    BadParameters,
    DegenerateTriple,
    DepthTooShallow,
    InconclusiveWindow,
    InvariantViolation,
)
from .maps import is_exact, iterate, to_mpf
from .partition import build_partition, phi_bijection
from .precision import arc_length, comparison_tolerance, in_arc, small_arc

LONG = "long"

# length-bound constant for per-iterate cell checks; the empirical maximum
# ratio is recorded in the cell for inspection
DEFAULT_LENGTH_BOUND = 16


@dataclass(frozen=True)
class Triple:
    z1: mpf
    z2: mpf
    z3: mpf

    def __post_init__(self):
        g1 = arc_length(self.z1, self.z2)
        g2 = arc_length(self.z2, self.z3)
        tol = comparison_tolerance()
        if g1 <= tol or g2 <= tol or g1 + g2 >= 1 - tol:
            raise DegenerateTriple(f"gaps ({mp.nstr(g1, 5)}, {mp.nstr(g2, 5)}) are not admissible")

    def lifted(self):
        """Unwrapped representatives t1 < t2 < t3 starting at z1."""
        t1 = self.z1
        t2 = t1 + arc_length(self.z1, self.z2)
        t3 = t2 + arc_length(self.z2, self.z3)
        return t1, t2, t3

    def gaps(self):
        return arc_length(self.z1, self.z2), arc_length(self.z2, self.z3)

    def points(self):
        return (self.z1, self.z2, self.z3)


def ratio(triple):
    g1, g2 = triple.gaps()
    return g1 / g2


def image_triple(f, triple):
    return Triple(f.evaluate(triple.z1), f.evaluate(triple.z2), f.evaluate(triple.z3))


def dr(f, triple):
    """Ratio distortion of the triple under f; independent of the lift."""
    return ratio(image_triple(f, triple)) / ratio(triple)


def dr_power(f, k, triple):
    """Ratio distortion under f^k, iterating the three points."""
    pts = triple.points()
    for _ in range(k):
        pts = tuple(f.evaluate(p) for p in pts)
    return ratio(Triple(*pts)) / ratio(triple)


def satisfies_anchor_conditions(triple, x0, bound):
    """Conditions (a) and (b): gap ratio within [1/bound, bound] and every
    point within bound * first-gap of the anchor."""
    r = ratio(triple)
    if not (1 / bound <= r <= bound):
        return False, f"gap ratio {mp.nstr(r, 6)} outside [1/{mp.nstr(bound, 6)}, ...]"
    g1 = triple.gaps()[0]
    worst = max(small_arc(x0, z) for z in triple.points())
    if worst > bound * g1:
        return False, f"anchor distance {mp.nstr(worst, 6)} > bound * {mp.nstr(g1, 6)}"
    return True, ""


# -- distortion bound verifiers -------------------------------------------------


def _log_df_slope(f, x):
    d = f.one_sided_derivatives(x)[1]  # resolve to the right at breaks
    return mp.log(to_mpf(d))


def log_df_power(f, x, k):
    """log Df^k(x) by the chain rule along the forward orbit."""
    total = mpf(0)
    y = to_mpf(x)
    for _ in range(k):
        total += _log_df_slope(f, y)
        y = f.evaluate(y)
    return total


def verify_finzi(f, table, n, samples=100, seed=0):
    """Worst two-point distortion |log(Df^k(x)/Df^k(y))| against V.

    x, y run over random common intervals [z, f^(q_{n-1})(z)] and
    0 <= k <= q_n.
    """
    rng = random.Random(seed)
    v = f.log_df_variation()
    q_prev, q_cur = table.q[n - 1], table.q[n]
    worst = mpf(0)
    for _ in range(samples):
        z = mpf(rng.random())
        span = arc_length(z, iterate(f, q_prev, z))
        x = (z + span * mpf(rng.random())) % 1
        y = (z + span * mpf(rng.random())) % 1
        k = rng.randint(0, q_cur)
        gap = abs(log_df_power(f, x, k) - log_df_power(f, y, k))
        worst = max(worst, gap)
    return {"n": n, "samples": samples, "worst_log_ratio": worst, "bound": v, "margin": v - worst}


def verify_denjoy(f, table, n_values, samples=200, seed=0):
    """Df^(q_n) against [e^-V, e^V] for each requested n, shared orbits.

    One orbit of length max(q_n) per sample; prefix sums of log Df are
    read off at each closest-return time.
    """
    rng = random.Random(seed)
    v = f.log_df_variation()
    marks = {table.q[n]: n for n in n_values}
    q_max = max(marks)
    worst = {n: mpf(0) for n in n_values}
    for _ in range(samples):
        x = mpf(rng.random())
        total = mpf(0)
        y = x
        for j in range(1, q_max + 1):
            total += _log_df_slope(f, y)
            y = f.evaluate(y)
            if j in marks:
                worst[marks[j]] = max(worst[marks[j]], abs(total))
    return [
        {"n": n, "q_n": table.q[n], "worst_abs_log": worst[n], "bound": v, "margin": v - worst[n]}
        for n in sorted(n_values)
    ]


def verify_comparability(f, table, n, samples=200, seed=0):
    """Segment-pair length ratios under f^j against the e^(2V) envelope."""
    rng = random.Random(seed)
    v = f.log_df_variation()
    q_prev, q_cur = table.q[n - 1], table.q[n]
    worst = mpf(0)
    for _ in range(samples):
        z1 = mpf(rng.random())
        z2 = iterate(f, q_prev, z1)
        z3 = iterate(f, q_prev, z2)
        span = arc_length(z1, z3)
        ends = sorted(mpf(rng.random()) for _ in range(4))
        k1 = ((z1 + ends[0] * span) % 1, (z1 + ends[1] * span) % 1)
        k2 = ((z1 + ends[2] * span) % 1, (z1 + ends[3] * span) % 1)
        j = rng.randint(-q_cur, q_cur)
        len1, len2 = arc_length(*k1), arc_length(*k2)
        if min(len1, len2) <= comparison_tolerance() * 1000:
            continue
        img1 = arc_length(iterate(f, j, k1[0]), iterate(f, j, k1[1]))
        img2 = arc_length(iterate(f, j, k2[0]), iterate(f, j, k2[1]))
        gap = abs(mp.log((img1 / img2) / (len1 / len2)))
        worst = max(worst, gap)
    return {"n": n, "samples": samples, "worst_log_ratio": worst, "bound": 2 * v,
            "margin": 2 * v - worst}


# -- primary cells ---------------------------------------------------------------


@dataclass
class PrimaryCell:
    y1: mpf
    y2: mpf
    y3: mpf
    n: int
    x0: mpf
    c: mpf
    index_of_c: int
    side_of_c: str
    delta: mpf
    variation: mpf
    anchor_bound: mpf  # e^{3V} + e^V + 1
    length_bound: mpf
    q_prev: int
    q_cur: int
    empirical_length_ratio: mpf
    summed_length: mpf

    def triple(self):
        return Triple(self.y1, self.y2, self.y3)

    def base_gap(self):
        return arc_length(self.y1, self.y2)

    def neighborhood(self, scale):
        """V_{n,scale}: the symmetric window of radius scale * m([y1,y2]) around y2."""
        radius = scale * self.base_gap()
        return ((self.y2 - radius) % 1, (self.y2 + radius) % 1)


def build_primary_cell(f, table, x0, c, n, delta, length_bound=DEFAULT_LENGTH_BOUND):
    """Verified cell (y1, y2, y3) around the backward orbit of c at depth n.

    Fails with DepthTooShallow naming the first property that does not
    hold at this depth.
    """
    if n % 2 == 0:
        raise BadParameters("cells use odd depths")
    x0, c = to_mpf(x0) % 1, to_mpf(c) % 1
    part = build_partition(f, table, x0, n)
    loc = part.locate(c)
    i_c = loc.i_n
    y2 = iterate(f, -i_c, c)
    q_prev, q_cur = part.q_prev, part.q_cur
    y1 = iterate(f, -q_prev, y2)
    y3 = iterate(f, q_prev, y2)
    v = f.log_df_variation()
    r_const = mp.e ** (3 * v) + mp.e ** v + 1
    lam = (1 + mp.e ** (-v)) ** mpf("-0.5")
    delta = to_mpf(delta)

    fq_pts = {}
    for name, start in (("y1", y1), ("y2", y2), ("y3", y3)):
        fq_pts[name] = iterate(f, q_cur, start)
    # (c-0) both triples inside the delta-neighbourhood of x0
    for label, pts in (("source", (y1, y2, y3)), ("image", tuple(fq_pts.values()))):
        for p in pts:
            if small_arc(p, x0) > delta:
                raise DepthTooShallow("c-0", f"{label} triple leaves the {mp.nstr(delta, 4)}-ball")
    # (c-1) y2 sits in the base interval of the partition (true by construction)
    base = part.interval(loc.side, 0) if loc.side else None
    if base is not None and not in_arc(y2, base.left, base.right):
        raise DepthTooShallow("c-1", "y2 escaped the base interval")

    # iterate [y1, y3] through one closest-return block
    a, b = y1, y3
    worst_ratio = mpf(0)
    summed = mpf(0)
    breaks = f.break_points()
    for j in range(q_cur):
        length = arc_length(a, b)
        summed += length
        worst_ratio = max(worst_ratio, length / lam ** n)
        if j != i_c:
            if _strictly_inside(c, a, b):
                raise DepthTooShallow("c-5", f"iterate {j} recaptures the break")
        else:
            for bp in breaks:
                if small_arc(bp.location_mpf, c) <= comparison_tolerance() * 256:
                    continue
                if _strictly_inside(bp.location_mpf, a, b):
                    raise DepthTooShallow("c-5", f"iterate {j} contains another break")
        a, b = f.evaluate(a), f.evaluate(b)
    if worst_ratio > length_bound:
        raise DepthTooShallow("c-2", f"length ratio {mp.nstr(worst_ratio, 5)} > {length_bound}")
    if summed > 2:
        raise DepthTooShallow("c-3", f"summed length {mp.nstr(summed, 5)} > 2")

    for label, tri in (
        ("source", Triple(y1, y2, y3)),
        ("image", Triple(fq_pts["y1"], fq_pts["y2"], fq_pts["y3"])),
    ):
        ok, why = satisfies_anchor_conditions(tri, x0, r_const)
        if not ok:
            raise DepthTooShallow("c-4", f"{label} triple: {why}")

    return PrimaryCell(
        y1=y1, y2=y2, y3=y3, n=n, x0=x0, c=c, index_of_c=i_c, side_of_c=loc.side,
        delta=delta, variation=v, anchor_bound=r_const, length_bound=mpf(length_bound),
        q_prev=q_prev, q_cur=q_cur, empirical_length_ratio=worst_ratio, summed_length=summed,
    )


def _strictly_inside(x, a, b, tol=None):
    if tol is None:
        tol = comparison_tolerance() * 256
    span = arc_length(a, b)
    off = arc_length(a, x)
    return tol < off < span - tol


# -- break classification ---------------------------------------------------------


@dataclass
class Thresholds:
    theta_low: float = 0.05
    theta_mid: float = 0.15
    subsequence_fraction: float = 0.6


@dataclass
class LevelEntry:
    n: int
    i_n: int
    j_n: int
    regime_early: bool  # i_n < q_{n-1}
    t: mpf


@dataclass
class BreakRecord:
    location: mpf
    orbit_offset: object  # int when on the orbit of c, else None
    entries: dict = field(default_factory=dict)
    tag: str = ""

    def t_series(self):
        return [(n, e.t) for n, e in sorted(self.entries.items())]


@dataclass
class BreakClassification:
    c: mpf
    x0: mpf
    window: list
    records: list
    gamma0: mpf
    discarded: dict
    cells: dict

    def record_at(self, location):
        for rec in self.records:
            if small_arc(rec.location, location) <= comparison_tolerance() * 256:
                return rec
        return None

    def e_points(self, n):
        """E-members at level n as (location, k_n) pairs, including c itself.

        Q2 members use i_n, Q3 members use j_n; breaks on the orbit of c
        enter with the exact offset-shifted index when it lies in range.
        """
        cell = self.cells[n]
        out = [(self.c, cell.index_of_c)]
        for rec in self.records:
            if rec.orbit_offset is not None:
                k = cell.index_of_c + rec.orbit_offset
                if 0 <= k < cell.q_cur:
                    out.append((rec.location, k))
            elif rec.tag in ("Q2", "Q3") and n in rec.entries:
                e = rec.entries[n]
                out.append((rec.location, e.i_n if rec.tag == "Q2" else e.j_n))
        return out


def locate_backward_index(f, cell, d):
    """The unique index i in [0, q_n) whose bucket holds d, plus f^{-i}(d).

    Scans the backward orbit of d for hits of the closed arc [y1, y2];
    a hit at k >= q_n folds to i = k - q_n (the wrapped short-side case).
    """
    q_cur, q_prev = cell.q_cur, cell.q_prev
    inv = f.invert()
    hits = []
    y = to_mpf(d) % 1
    pts = []
    for k in range(q_cur + q_prev):
        pts.append(y)
        if in_arc(y, cell.y1, cell.y2):
            hits.append(k)
        y = inv.evaluate(y)
    folded = sorted({k % q_cur for k in hits})
    if len(folded) != 1:
        raise InvariantViolation(f"bucket index not unique: hits {hits}")
    i_n = folded[0]
    return i_n, pts[i_n], pts


def relative_position(f, cell, d):
    """The (i_n, j_n, regime, t) record of one off-orbit point at one depth.

    t is the position of f^{-i_n}(d) relative to y2, normalised by the
    containing return interval; t near 0 means the preimage hugs y2.
    """
    i_n, pre, _ = locate_backward_index(f, cell, d)
    j_n = phi_bijection(i_n, cell.q_prev, cell.q_cur)
    early = i_n < cell.q_prev
    numer = arc_length(pre, cell.y2)
    if early:
        far = iterate(f, cell.q_cur, cell.y1)
        denom = arc_length(far, cell.y2)
    else:
        denom = arc_length(cell.y1, cell.y2)
    t = numer / denom
    if not -0.01 <= float(t) <= 1.01:
        raise InvariantViolation(f"relative position {mp.nstr(t, 6)} escapes [0,1]")
    return LevelEntry(n=cell.n, i_n=i_n, j_n=j_n, regime_early=early, t=t)


def classify_breaks(
    f,
    table,
    x0,
    c,
    window,
    delta,
    points=None,
    thresholds=Thresholds(),
    orbit_max_iter=64,
    orbit_tol=None,
):
    """Tag each break (or supplied point) by the trend of its t-series.

    Points on the orbit of c are recorded with their exact offsets and
    skipped by the t-machinery. Levels where the primary cell fails are
    recorded as discarded.
    """
    from .orbits import same_orbit

    c = to_mpf(c) % 1
    if orbit_tol is None:
        orbit_tol = mpf("1e-8")
    if points is None:
        points = [b.location_mpf for b in f.break_points()
                  if small_arc(b.location_mpf, c) > comparison_tolerance() * 256]
    cells, discarded = {}, {}
    for n in window:
        try:
            cells[n] = build_primary_cell(f, table, x0, c, n, delta)
        except DepthTooShallow as err:
            discarded[n] = str(err)
    if not cells:
        raise InconclusiveWindow("no level of the window admits a primary cell")

    records = []
    for d in points:
        d = to_mpf(d) % 1
        offset = same_orbit(f, c, d, orbit_max_iter, orbit_tol)
        rec = BreakRecord(location=d, orbit_offset=offset)
        if offset is None:
            for n, cell in cells.items():
                rec.entries[n] = relative_position(f, cell, d)
            rec.tag = _tag_series(rec, cells, thresholds)
        else:
            rec.tag = "orbit-exact"
        records.append(rec)

    gamma0 = _clearance(records, thresholds)
    return BreakClassification(
        c=c, x0=to_mpf(x0) % 1, window=list(window), records=records,
        gamma0=gamma0, discarded=discarded, cells=cells,
    )


def _tag_series(rec, cells, thr):
    levels = sorted(rec.entries)
    ts = [float(rec.entries[n].t) for n in levels]
    count = len(levels)
    tail = levels[-max(2, -(-count * 2 // 5)):]
    if all(float(rec.entries[n].t) < thr.theta_low for n in tail):
        return "Q2"
    if all(float(rec.entries[n].t) > 1 - thr.theta_low for n in tail):
        return "Q3"
    mid = [n for n in levels if thr.theta_mid <= float(rec.entries[n].t) <= 1 - thr.theta_mid]
    need = -(-count * 6 // 10) if thr.subsequence_fraction == 0.6 else int(
        count * thr.subsequence_fraction + 0.999999
    )
    early = [n for n in mid if rec.entries[n].regime_early]
    late = [n for n in mid if not rec.entries[n].regime_early]
    if len(early) >= need:
        return "Q11"
    if len(late) >= need:
        return "Q12"
    if min(ts) < thr.theta_low and max(ts) > 1 - thr.theta_low:
        return "Q4-suspect"
    raise InconclusiveWindow(
        f"point {mp.nstr(rec.location, 8)}: t-series {[round(t, 3) for t in ts]} fits no tag"
    )


def _clearance(records, thr):
    vals = []
    for rec in records:
        if rec.tag in ("Q11", "Q12"):
            for e in rec.entries.values():
                t = float(e.t)
                if thr.theta_mid <= t <= 1 - thr.theta_mid:
                    vals.append(min(e.t, 1 - e.t))
    if not vals:
        return mpf(thr.theta_mid)
    return min(vals)


# -- secondary cells --------------------------------------------------------------


@dataclass
class SecondaryCell:
    z1: mpf
    z2: mpf
    z3: mpf
    parent: PrimaryCell
    beta: mpf
    gamma: mpf
    derived_bound: mpf  # parent bound * e^{2V} / beta
    e_members: list  # (location, k_n)
    empirical_length_ratio: mpf
    summed_length: mpf

    def triple(self):
        return Triple(self.z1, self.z2, self.z3)


def build_secondary_cell(f, cell, e_members, beta, gamma, gamma0):
    """Derived cell with z2 = y2 and offsets (beta+gamma)/2 of the base gap.

    Verifies the window containment, uniqueness of each E-member's
    return index in the beta/4 window, per-iterate and summed length
    bounds, anchor conditions with the enlarged constant, and break
    avoidance off the E-return iterates.
    """
    beta, gamma = to_mpf(beta), to_mpf(gamma)
    if not 0 < beta < gamma:
        raise BadParameters("need 0 < beta < gamma")
    if gamma >= to_mpf(gamma0):
        raise BadParameters(f"gamma must stay below the clearance {mp.nstr(to_mpf(gamma0), 6)}")
    gap = cell.base_gap()
    offset = (beta + gamma) / 2 * gap
    z2 = cell.y2
    z1 = (z2 - offset) % 1
    z3 = (z2 + offset) % 1
    v = cell.variation
    r_beta = cell.anchor_bound * mp.e ** (2 * v) / beta

    # (0) containment in the gamma-window inside [y1, y3]
    lo, hi = cell.neighborhood(gamma)
    if not (in_arc(z1, lo, hi) and in_arc(z3, lo, hi)):
        raise DepthTooShallow("s-0", "triple escapes the gamma window")
    if not (in_arc(lo, cell.y1, cell.y3) and in_arc(hi, cell.y1, cell.y3)):
        raise DepthTooShallow("s-0", "gamma window escapes [y1, y3]")

    # (1) unique return index per E-member inside the beta/4 window
    k_of = {}
    w_lo, w_hi = cell.neighborhood(beta / 4)
    inv = f.invert()
    for d, expected_k in e_members:
        y = to_mpf(d) % 1
        hits = []
        for k in range(cell.q_cur):
            if in_arc(y, w_lo, w_hi):
                hits.append(k)
            y = inv.evaluate(y)
        if hits != [expected_k]:
            raise DepthTooShallow(
                "s-1", f"member {mp.nstr(to_mpf(d), 8)} hits {hits}, expected [{expected_k}]"
            )
        k_of[float(to_mpf(d) % 1)] = expected_k

    # (2), (3), (5): iterate [z1, z3] one return block
    lam = (1 + mp.e ** (-v)) ** mpf("-0.5")
    breaks = f.break_points()
    skip = {k for _, k in e_members}
    a, b = z1, z3
    worst_ratio, summed = mpf(0), mpf(0)
    for j in range(cell.q_cur):
        length = arc_length(a, b)
        summed += length
        worst_ratio = max(worst_ratio, length / lam ** cell.n)
        if j not in skip:
            for bp in breaks:
                if _strictly_inside(bp.location_mpf, a, b):
                    raise DepthTooShallow(
                        "s-5", f"iterate {j} captures the break at {mp.nstr(bp.location_mpf, 8)}"
                    )
        a, b = f.evaluate(a), f.evaluate(b)
    if worst_ratio > cell.length_bound:
        raise DepthTooShallow("s-2", f"length ratio {mp.nstr(worst_ratio, 5)}")
    if summed > 2:
        raise DepthTooShallow("s-3", f"summed length {mp.nstr(summed, 5)} > 2")

    # (4) anchor conditions with the enlarged constant for both triples
    src = Triple(z1, z2, z3)
    img = Triple(*(iterate(f, cell.q_cur, p) for p in src.points()))
    for label, tri in (("source", src), ("image", img)):
        ok, why = satisfies_anchor_conditions(tri, cell.x0, r_beta)
        if not ok:
            raise DepthTooShallow("s-4", f"{label} triple: {why}")

    # (6) each member returns strictly inside the triple
    for d, k in e_members:
        pre = iterate(f, -k, to_mpf(d) % 1)
        if not _strictly_inside(pre, z1, z3, tol=comparison_tolerance()):
            raise DepthTooShallow("s-6", f"member {mp.nstr(to_mpf(d), 8)} misses the open triple")

    return SecondaryCell(
        z1=z1, z2=z2, z3=z3, parent=cell, beta=beta, gamma=gamma, derived_bound=r_beta,
        e_members=list(e_members), empirical_length_ratio=worst_ratio, summed_length=summed,
    )


# -- distortion traces -------------------------------------------------------------


@dataclass
class TraceRow:
    n: int
    q_n: int
    dr_f: mpf
    dr_g: mpf
    ratio: mpf  # dr_g / dr_f
    pi_target: mpf
    e_members: list
    gamma0: mpf
    h_resolution_ok: bool


@dataclass
class DistortionTrace:
    rows: list
    pi_f: object
    pi_g: object
    pi_target: object
    beta: mpf
    gamma: mpf
    envelope_bound: mpf

    def final_row(self):
        return self.rows[-1]


def trace_distortion(
    f,
    table_f,
    g,
    h,
    x0,
    c,
    window,
    delta,
    beta,
    gamma,
    classification=None,
    thresholds=Thresholds(),
):
    """Trace Dr_{f^{q_n}}, Dr_{g^{q_n}} over derived cells along the window.

    h must be evaluable on circle points; the g-side break products are
    read off by matching h-images of E-members against g's breaks. Each
    recorded distortion is checked against the e^{2V} comparability
    envelope of its own map.
    """
    if classification is None:
        classification = classify_breaks(f, table_f, x0, c, list(window), delta,
                                         thresholds=thresholds)
    v_f = f.log_df_variation()
    v_g = g.log_df_variation()
    envelope = mp.e ** (2 * max(v_f, v_g)) * (1 + mpf("1e-9"))
    g_breaks = g.break_points()
    rows = []
    pi_f = pi_g = None
    for n in sorted(classification.cells):
        if n not in classification.cells:
            continue
        cell = classification.cells[n]
        e_members = classification.e_points(n)
        sec = build_secondary_cell(f, cell, e_members, beta, gamma, classification.gamma0)
        q_n = cell.q_cur
        drf = dr_power(f, q_n, sec.triple())
        h_tri = Triple(h.evaluate(sec.z1), h.evaluate(sec.z2), h.evaluate(sec.z3))
        drg = dr_power(g, q_n, h_tri)
        for val, bound_v in ((drf, v_f), (drg, v_g)):
            if not (mp.e ** (-2 * bound_v) / (1 + mpf("1e-9")) <= val <= mp.e ** (2 * bound_v) * (1 + mpf("1e-9"))):
                raise InvariantViolation(
                    f"distortion {mp.nstr(val, 8)} escapes the e^(2V) envelope at n={n}"
                )
        pi_f = _jump_product(f.break_points(), [loc for loc, _ in e_members])
        pi_g = _jump_product(g_breaks, [h.evaluate(loc) for loc, _ in e_members])
        pi_target = to_mpf(pi_g) / to_mpf(pi_f)
        h_ok = _h_resolution_ok(h, sec)
        rows.append(
            TraceRow(
                n=n, q_n=q_n, dr_f=drf, dr_g=drg, ratio=drg / drf,
                pi_target=pi_target, e_members=e_members,
                gamma0=classification.gamma0, h_resolution_ok=h_ok,
            )
        )
    if not rows:
        raise InconclusiveWindow("every level of the window was discarded")
    return DistortionTrace(
        rows=rows, pi_f=pi_f, pi_g=pi_g,
        pi_target=rows[-1].pi_target, beta=to_mpf(beta), gamma=to_mpf(gamma),
        envelope_bound=envelope,
    )


def _jump_product(breaks, locations, tol=None):
    if tol is None:
        tol = mpf("1e-6")
    product = Fraction(1)
    for loc in locations:
        match = None
        for b in breaks:
            if small_arc(b.location_mpf, to_mpf(loc)) <= tol:
                match = b
                break
        if match is not None:
            if is_exact(product) and is_exact(match.jump):
                product = Fraction(product) * Fraction(match.jump)
            else:
                product = to_mpf(product) * to_mpf(match.jump)
    return product


def _h_resolution_ok(h, sec):
    """Whether h resolves the cell scale (always true for exact maps)."""
    gaps = getattr(h, "max_node_gap", None)
    if gaps is None:
        return True
    cell_gap = min(arc_length(sec.z1, sec.z2), arc_length(sec.z2, sec.z3))
    return to_mpf(gaps()) * 10 <= cell_gap
