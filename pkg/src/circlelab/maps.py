"""Circle homeomorphisms built from affine and quadratic arcs.

A map is stored as lift polynomials on arcs of [0,1). Coefficients may be
exact (int/Fraction) or mpf; exact slopes are kept exact so jump products
of piecewise-affine maps telescope to 1 with no rounding. Compositions
that stay within degree <= 2 are flattened to explicit pieces; anything
else (and every iterate) is evaluated pointwise, since flattening an
iterate would explode the piece count geometrically.
"""

import json
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction

from mpmath import mp, mpf

from .errors import InvariantViolation, NonInvertiblePiece
from .precision import comparison_tolerance, frac1

# A one-sided derivative ratio closer to 1 than this is arithmetic noise,
# not a break.
BREAK_LOG_THRESHOLD_BITS = 40


def to_mpf(value):
    if isinstance(value, Fraction):
        return mpf(value.numerator) / value.denominator
    return mpf(value)


def is_exact(value):
    return isinstance(value, (int, Fraction))


def _poly_eval(coeffs, x):
    c0, c1, c2 = coeffs
    if is_exact(x) and all(is_exact(c) for c in coeffs):
        return c0 + c1 * x + c2 * x * x
    x = to_mpf(x)
    return (to_mpf(c2) * x + to_mpf(c1)) * x + to_mpf(c0)


def _poly_deriv(coeffs, x):
    _, c1, c2 = coeffs
    if c2 == 0:
        return c1
    if is_exact(x) and all(is_exact(c) for c in coeffs):
        return c1 + 2 * c2 * x
    return to_mpf(c1) + 2 * to_mpf(c2) * to_mpf(x)


def _poly_shift_input(coeffs, k):
    """Coefficients of p(x + k)."""
    c0, c1, c2 = coeffs
    return (c0 + c1 * k + c2 * k * k, c1 + 2 * c2 * k, c2)


def _poly_compose(outer, inner):
    """Coefficients of outer(inner(x)); combined degree must stay <= 2."""
    b0, b1, b2 = outer
    a0, a1, a2 = inner
    if b2 != 0 and a2 != 0:
        raise ValueError("composition would exceed quadratic degree")
    if b2 == 0:
        return (b0 + b1 * a0, b1 * a1, b1 * a2)
    # outer quadratic, inner affine
    return (
        b0 + b1 * a0 + b2 * a0 * a0,
        b1 * a1 + 2 * b2 * a0 * a1,
        b2 * a1 * a1,
    )


@dataclass(frozen=True)
class Piece:
    """One arc of the lift: polynomial c0 + c1 x + c2 x^2 on [left, right)."""

    left: object
    coeffs: tuple

    @property
    def kind(self):
        return "affine" if self.coeffs[2] == 0 else "quadratic"


@dataclass
class BreakPoint:
    location: object
    left_derivative: object
    right_derivative: object
    jump: object

    @property
    def location_mpf(self):
        return to_mpf(self.location)

    def jump_mpf(self):
        return to_mpf(self.jump)


class CircleMap:
    """Interface shared by concrete and lazily composed maps."""

    def evaluate(self, x):
        return frac1(self.lift(x))

    def lift(self, x):
        raise NotImplementedError

    def one_sided_derivatives(self, x):
        raise NotImplementedError

    def break_points(self):
        raise NotImplementedError

    def invert(self):
        raise NotImplementedError

    def log_df_variation(self):
        """Total variation of log Df (an upper bound for lazy composites)."""
        raise NotImplementedError

    def derivative_bounds(self):
        raise NotImplementedError

    def jump_at(self, x):
        dl, dr = self.one_sided_derivatives(x)
        if is_exact(dl) and is_exact(dr):
            return Fraction(dl) / Fraction(dr)
        return to_mpf(dl) / to_mpf(dr)


class PiecewiseMap(CircleMap):
    """Concrete map with explicit pieces covering [0,1) from 0."""

    def __init__(self, pieces, oracle_conjugacy=None, rotation_alpha=None):
        if not pieces:
            raise InvariantViolation("a map needs at least one piece")
        self.pieces = list(pieces)
        self.oracle_conjugacy = oracle_conjugacy
        self.rotation_alpha = rotation_alpha
        self._lefts = [to_mpf(p.left) for p in self.pieces]
        self._mpf_coeffs = [tuple(to_mpf(c) for c in p.coeffs) for p in self.pieces]
        self._validate()
        self._lift_at_left = [self._piece_lift(i, self._lefts[i]) for i in range(len(self.pieces))]

    # -- construction checks -------------------------------------------------

    def _validate(self):
        tol = comparison_tolerance()
        if self._lefts[0] != 0:
            raise InvariantViolation("pieces must start at 0")
        for a, b in zip(self._lefts, self._lefts[1:]):
            if not a < b:
                raise InvariantViolation("piece left endpoints must strictly increase")
        if self._lefts[-1] >= 1:
            raise InvariantViolation("piece left endpoints must lie in [0,1)")
        rights = self._lefts[1:] + [mpf(1)]
        for i, piece in enumerate(self.pieces):
            dl = _poly_deriv(self._mpf_coeffs[i], self._lefts[i])
            dr = _poly_deriv(self._mpf_coeffs[i], rights[i])
            if dl <= 0 or dr <= 0:
                raise InvariantViolation(f"piece {i} has nonpositive derivative")
        # cancellation headroom: composed quadratics carry coefficients of
        # size ~slope/radius, so continuity can only hold to tol * scale
        scale = max(abs(c) for cs in self._mpf_coeffs for c in cs) + 1
        for i in range(len(self.pieces) - 1):
            here = _poly_eval(self._mpf_coeffs[i], rights[i])
            there = _poly_eval(self._mpf_coeffs[i + 1], rights[i])
            if abs(here - there) > tol * scale:
                raise InvariantViolation(f"lift discontinuous at piece boundary {i + 1}")
        wrap = _poly_eval(self._mpf_coeffs[-1], mpf(1))
        start = _poly_eval(self._mpf_coeffs[0], mpf(0))
        if abs(wrap - (start + 1)) > tol * scale:
            raise InvariantViolation("lift(1) != lift(0) + 1; total increase must be exactly 1")

    # -- evaluation ----------------------------------------------------------

    def _piece_index(self, r):
        i = bisect_right(self._lefts, r) - 1
        return max(i, 0)

    def _piece_lift(self, i, r):
        return _poly_eval(self._mpf_coeffs[i], r)

    def lift(self, x):
        x = to_mpf(x)
        n = mp.floor(x)
        r = x - n
        if r >= 1:  # guard against floor rounding at representation edges
            r -= 1
            n += 1
        return self._piece_lift(self._piece_index(r), r) + n

    def one_sided_derivatives(self, x):
        # snap tolerance absorbs root-solve noise from lazy inverses
        tol = comparison_tolerance() * (mpf(2) ** 24)
        r = frac1(to_mpf(x))
        if r >= 1 - tol:
            r = mpf(0)
        i = self._piece_index(r)
        boundary = abs(r - self._lefts[i]) <= tol
        if not boundary and i + 1 < len(self.pieces) and self._lefts[i + 1] - r <= tol:
            i += 1
            boundary = True
        right = _poly_deriv(self.pieces[i].coeffs, self.pieces[i].left if boundary else r)
        if boundary:
            j = i - 1  # previous piece, wrapping to the last one
            at = self.pieces[i].left if i > 0 else (
                self.pieces[0].left + 1 if is_exact(self.pieces[0].left) else self._lefts[0] + 1
            )
            left = _poly_deriv(self.pieces[j].coeffs, at)
        else:
            left = right
        return left, right

    def break_points(self):
        out = []
        threshold = mpf(2) ** (-BREAK_LOG_THRESHOLD_BITS)
        for piece in self.pieces:
            dl, dr = self.one_sided_derivatives(to_mpf(piece.left))
            if is_exact(dl) and is_exact(dr):
                jump = Fraction(dl) / Fraction(dr)
                if jump == 1:
                    continue
            else:
                jump = to_mpf(dl) / to_mpf(dr)
                if abs(mp.log(jump)) <= threshold:
                    continue
            out.append(BreakPoint(piece.left, dl, dr, jump))
        return out

    def log_df_variation(self):
        total = mpf(0)
        rights = self.pieces[1:] + [None]
        for i, piece in enumerate(self.pieces):
            right = self._lefts[i + 1] if i + 1 < len(self.pieces) else mpf(1)
            dl = _poly_deriv(self._mpf_coeffs[i], self._lefts[i])
            dr = _poly_deriv(self._mpf_coeffs[i], right)
            total += abs(mp.log(dr) - mp.log(dl))
        for b in self.break_points():
            total += abs(mp.log(to_mpf(b.jump)))
        return total

    def derivative_bounds(self):
        lo, hi = mpf("inf"), mpf(0)
        for i in range(len(self.pieces)):
            right = self._lefts[i + 1] if i + 1 < len(self.pieces) else mpf(1)
            for at in (self._lefts[i], right):
                d = _poly_deriv(self._mpf_coeffs[i], at)
                lo, hi = min(lo, d), max(hi, d)
        return lo, hi

    def is_affine(self):
        return all(p.coeffs[2] == 0 for p in self.pieces)

    def invert(self):
        if self.derivative_bounds()[0] <= 0:
            raise NonInvertiblePiece("derivative bound check failed")
        if not self.is_affine():
            return InverseMap(self)
        arcs = []
        for i, piece in enumerate(self.pieces):
            c0, c1, _ = piece.coeffs
            right = self.pieces[i + 1].left if i + 1 < len(self.pieces) else _one_like(piece.left)
            ys = _poly_eval(piece.coeffs, piece.left)
            ye = _poly_eval(piece.coeffs, right)
            inv_c1 = Fraction(1) / Fraction(c1) if is_exact(c1) else 1 / to_mpf(c1)
            inv_c0 = -c0 * inv_c1 if (is_exact(c0) and is_exact(inv_c1)) else -to_mpf(c0) * to_mpf(inv_c1)
            arcs.append((ys, ye, (inv_c0, inv_c1, 0)))
        return piecewise_from_arcs(arcs)


def _one_like(left):
    return Fraction(1) if is_exact(left) else mpf(1)


def piecewise_from_arcs(arcs):
    """Assemble a PiecewiseMap from lift arcs (start, end, poly) on the real line.

    Arcs must cover one period. Arcs crossing an integer are split, inputs
    are reduced mod 1, and one integer constant is subtracted from every
    polynomial so the lift starts in [0,1).
    """
    flat = []
    for ys, ye, poly in arcs:
        flat.extend(_split_arc(ys, ye, poly))
    normalized = []
    for ys, ye, poly in flat:
        k = int(mp.floor(to_mpf(ys) + comparison_tolerance()))
        if k != 0:
            ys, ye = ys - k, ye - k
            poly = _poly_shift_input(poly, k)
            poly = (poly[0] - k, poly[1], poly[2])
        normalized.append((ys, poly))
    normalized.sort(key=lambda t: to_mpf(t[0]))
    start0 = normalized[0][0]
    if abs(to_mpf(start0)) > comparison_tolerance():
        raise InvariantViolation("arcs do not cover the circle from 0")
    first_val = _poly_eval(normalized[0][1], to_mpf(start0))
    shift = int(mp.floor(first_val + comparison_tolerance()))
    pieces = []
    for ys, poly in normalized:
        if shift != 0:
            poly = (poly[0] - shift, poly[1], poly[2])
        left = ys
        if pieces and to_mpf(left) <= to_mpf(pieces[-1].left):
            raise InvariantViolation("overlapping arcs")
        if not pieces:
            left = Fraction(0) if is_exact(ys) else mpf(0)
        pieces.append(Piece(left, poly))
    return PiecewiseMap(pieces)


def _split_arc(ys, ye, poly):
    """Split a lift arc at integer crossings of its input."""
    ys_f, ye_f = to_mpf(ys), to_mpf(ye)
    tol = comparison_tolerance()
    first_cross = mp.floor(ys_f + tol) + 1
    out = []
    cur = ys
    cross = first_cross
    while cross < ye_f - tol:
        cross_exact = int(cross)
        out.append((cur, cross_exact, poly))
        cur = cross_exact
        cross += 1
    out.append((cur, ye, poly))
    return out


class ComposedMap(CircleMap):
    """Lazy composition outer(inner(x)), evaluated pointwise."""

    def __init__(self, outer, inner):
        self.outer = outer
        self.inner = inner

    def lift(self, x):
        return self.outer.lift(self.inner.lift(x))

    def one_sided_derivatives(self, x):
        il, ir = self.inner.one_sided_derivatives(x)
        y = self.inner.evaluate(x)
        ol, orr = self.outer.one_sided_derivatives(y)
        return _mul(ol, il), _mul(orr, ir)

    def break_points(self):
        candidates = [b.location_mpf for b in self.inner.break_points()]
        inner_inv = self.inner.invert()
        candidates += [inner_inv.evaluate(b.location_mpf) for b in self.outer.break_points()]
        return _breaks_from_candidates(self, candidates)

    def invert(self):
        return ComposedMap(self.inner.invert(), self.outer.invert())

    def log_df_variation(self):
        return self.outer.log_df_variation() + self.inner.log_df_variation()

    def derivative_bounds(self):
        ol, oh = self.outer.derivative_bounds()
        il, ih = self.inner.derivative_bounds()
        return to_mpf(ol) * to_mpf(il), to_mpf(oh) * to_mpf(ih)


class InverseMap(CircleMap):
    """Lazy inverse; quadratic arcs invert through the closed-form root."""

    def __init__(self, base):
        if base.derivative_bounds()[0] <= 0:
            raise NonInvertiblePiece("derivative bound check failed")
        self.base = base

    def lift(self, y):
        base = self.base
        y = to_mpf(y)
        lift0 = base._lift_at_left[0]
        k = mp.floor(y - lift0)
        yr = y - k
        if yr >= lift0 + 1:
            yr -= 1
            k += 1
        i = bisect_right(base._lift_at_left, yr) - 1
        i = max(i, 0)
        last = len(base.pieces) - 1
        for j in (i, max(i - 1, 0), min(i + 1, last)):
            x = _solve_piece(base, j, yr)
            if x is not None:
                return x + k
        raise InvariantViolation("inverse solve failed on all candidate arcs")

    def one_sided_derivatives(self, y):
        x = self.evaluate(y)
        dl, dr = self.base.one_sided_derivatives(x)
        return _inv(dl), _inv(dr)

    def break_points(self):
        out = []
        for b in self.base.break_points():
            loc = self.base.evaluate(b.location_mpf)
            jump = _inv(b.jump)
            out.append(BreakPoint(loc, _inv(b.left_derivative), _inv(b.right_derivative), jump))
        out.sort(key=lambda b: b.location_mpf)
        return out

    def invert(self):
        return self.base

    def log_df_variation(self):
        return self.base.log_df_variation()

    def derivative_bounds(self):
        lo, hi = self.base.derivative_bounds()
        return 1 / to_mpf(hi), 1 / to_mpf(lo)


def _mul(a, b):
    if is_exact(a) and is_exact(b):
        return Fraction(a) * Fraction(b)
    return to_mpf(a) * to_mpf(b)


def _inv(a):
    if is_exact(a):
        return Fraction(1) / Fraction(a)
    return 1 / to_mpf(a)


def _solve_piece(base, i, y):
    """Solve lift(x) = y on piece i of a PiecewiseMap, or None if outside."""
    c0, c1, c2 = base._mpf_coeffs[i]
    left = base._lefts[i]
    right = base._lefts[i + 1] if i + 1 < len(base.pieces) else mpf(1)
    tol = comparison_tolerance() * (mpf(2) ** 24) * (abs(c2) + 1)
    if c2 == 0:
        x = (y - c0) / c1
        return x if left - tol <= x <= right + tol else None
    disc = c1 * c1 - 4 * c2 * (c0 - y)
    if disc < 0:
        if disc < -tol:
            return None
        disc = mpf(0)
    root = mp.sqrt(disc)
    x1 = (-c1 + root) / (2 * c2)
    x2 = (-c1 - root) / (2 * c2)
    for x in (x1, x2):
        if left - tol <= x <= right + tol:
            return x
    return None


def _breaks_from_candidates(target_map, candidates):
    tol = comparison_tolerance() * 256
    threshold = mpf(2) ** (-BREAK_LOG_THRESHOLD_BITS)
    seen = []
    out = []
    for loc in sorted(candidates):
        if any(abs(loc - s) <= tol or abs(abs(loc - s) - 1) <= tol for s in seen):
            continue
        seen.append(loc)
        dl, dr = target_map.one_sided_derivatives(loc)
        if is_exact(dl) and is_exact(dr):
            jump = Fraction(dl) / Fraction(dr)
            if jump == 1:
                continue
        else:
            jump = to_mpf(dl) / to_mpf(dr)
            if abs(mp.log(jump)) <= threshold:
                continue
        out.append(BreakPoint(loc, dl, dr, jump))
    return out


# -- construction helpers ----------------------------------------------------


def rotation(alpha):
    """Rigid rotation by alpha (exact object or mpf)."""
    from .contfrac import QuadraticSurd

    if isinstance(alpha, QuadraticSurd):
        shift = alpha.to_mpf()
    elif is_exact(alpha):
        shift = Fraction(alpha)
    else:
        shift = to_mpf(alpha)
    return PiecewiseMap(
        [Piece(Fraction(0), (shift, Fraction(1), Fraction(0)))], rotation_alpha=alpha
    )


def pl_map(break_slopes, shift=0):
    """Piecewise-affine map from [(x, slope_right), ...] plus a lift shift.

    Break positions and slopes should be exact rationals; the total lift
    increase over one period must equal 1 exactly.
    """
    entries = sorted(((Fraction(x), Fraction(s)) for x, s in break_slopes), key=lambda t: t[0])
    if not entries:
        raise InvariantViolation("need at least one slope")
    if entries[0][0] != 0:
        # arc containing 0 carries the last break's slope
        entries = [(Fraction(0), entries[-1][1])] + entries
    xs = [x for x, _ in entries] + [Fraction(1)]
    slopes = [s for _, s in entries]
    total = sum(s * (xs[i + 1] - xs[i]) for i, s in enumerate(slopes))
    if total != 1:
        raise InvariantViolation(f"total lift increase is {total}, not 1")
    if any(s <= 0 for s in slopes):
        raise InvariantViolation("slopes must be positive")
    shift_val = Fraction(shift) if is_exact(shift) else to_mpf(shift)
    pieces = []
    value = shift_val
    for i, s in enumerate(slopes):
        c0 = value - s * xs[i] if is_exact(value) else to_mpf(value) - to_mpf(s * xs[i])
        pieces.append(Piece(xs[i], (c0, s, Fraction(0))))
        step = s * (xs[i + 1] - xs[i])
        value = value + step if is_exact(value) else to_mpf(value) + to_mpf(step)
    return PiecewiseMap(pieces)


def compose(g, f, flatten=True):
    """Composition g o f; flattened to explicit pieces when degree allows."""
    can_flatten = (
        flatten
        and isinstance(g, PiecewiseMap)
        and isinstance(f, PiecewiseMap)
        and (g.is_affine() or f.is_affine())
    )
    if not can_flatten:
        return ComposedMap(g, f)
    f_inv = f.invert()
    cuts = {to_mpf(0)}
    for piece in f.pieces:
        cuts.add(to_mpf(piece.left))
    for piece in g.pieces:
        cuts.add(frac1(f_inv.lift(to_mpf(piece.left))))
    ordered = sorted(cuts)
    tol = comparison_tolerance() * 64
    dedup = [ordered[0]]
    for c in ordered[1:]:
        if c - dedup[-1] > tol and c < 1 - tol:
            dedup.append(c)
    arcs = []
    for idx, left in enumerate(dedup):
        right = dedup[idx + 1] if idx + 1 < len(dedup) else mpf(1)
        mid = (left + right) / 2
        fi = f._piece_index(mid)
        y = f._piece_lift(fi, mid)
        k = int(mp.floor(y))
        gi = g._piece_index(y - k)
        g_poly = _poly_shift_input(g.pieces[gi].coeffs, -k)
        g_poly = (g_poly[0] + k, g_poly[1], g_poly[2])
        poly = _poly_compose(g_poly, f.pieces[fi].coeffs)
        left_obj = _exact_cut(f, g, f_inv, left) if idx > 0 else Fraction(0)
        arcs.append((left_obj if left_obj is not None else left, right, poly))
    pieces = []
    for i, (left, right, poly) in enumerate(arcs):
        pieces.append(Piece(left if i > 0 or is_exact(left) else Fraction(0), poly))
    return PiecewiseMap(pieces)


def _exact_cut(f, g, f_inv, cut):
    """Recover an exact cut location when it comes from exact break data."""
    tol = comparison_tolerance() * 64
    for piece in f.pieces:
        if is_exact(piece.left) and abs(to_mpf(piece.left) - cut) <= tol:
            return piece.left
    return cut


def invert(f):
    return f.invert()


def iterate(f, k, x):
    """k-fold application of f (backward when k < 0), evaluated pointwise."""
    x = to_mpf(x)
    if k >= 0:
        for _ in range(k):
            x = f.evaluate(x)
    else:
        g = f.invert()
        for _ in range(-k):
            x = g.evaluate(x)
    return x


def orbit(f, x, count):
    """Forward orbit [x, f(x), ..., f^(count-1)(x)]."""
    out = [frac1(to_mpf(x))]
    for _ in range(count - 1):
        out.append(f.evaluate(out[-1]))
    return out


def backward_orbit(f, x, count):
    """Backward orbit [x, f^-1(x), ..., f^-(count-1)(x)]."""
    g = f.invert()
    out = [frac1(to_mpf(x))]
    for _ in range(count - 1):
        out.append(g.evaluate(out[-1]))
    return out


def conjugated_rotation(alpha, h0):
    """Explicit form of h0^-1 o R_alpha o h0, keeping h0 as the oracle conjugacy."""
    from .contfrac import QuadraticSurd

    r = rotation(alpha)
    h0_inv = h0.invert()
    f = compose(compose(h0_inv, r), h0)
    f.oracle_conjugacy = h0
    f.rotation_alpha = alpha if isinstance(alpha, (QuadraticSurd, Fraction)) else to_mpf(alpha)
    return f


# -- map-spec loader ----------------------------------------------------------


def load_map_spec(spec):
    """Build a map from its JSON-style spec dict (or JSON string)."""
    from .contfrac import parse_rotation_spec

    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("type")
    if kind == "pl":
        breaks = [(Fraction(b["x"]), Fraction(b["slope_right"])) for b in spec["breaks"]]
        shift = spec.get("shift", "0")
        shift_val = Fraction(shift) if _looks_exact(shift) else mpf(shift)
        return pl_map(breaks, shift_val)
    if kind == "rotation":
        return rotation(parse_rotation_spec(spec["alpha"]))
    if kind == "conjugated_rotation":
        h0 = load_map_spec(spec["h0"])
        return conjugated_rotation(parse_rotation_spec(spec["alpha"]), h0)
    raise InvariantViolation(f"unknown map spec type: {kind!r}")


def _looks_exact(s):
    if isinstance(s, (int, Fraction)):
        return True
    s = str(s)
    return "/" in s or ("." not in s and "e" not in s.lower())
