"""Certified rotation numbers, prefix certification, and parameter tuning.

The sign of lift^q(x) - x - p is constant over the circle when the
rotation number is irrational (a zero would be a periodic orbit), so a
sampled sign decides the position of rho relative to p/q. Partial
quotients are extracted by marching semiconvergents until they cross rho;
the same two tests per level replayed against known quotients certify a
prefix. Lift orbits are cached per sample, so the total cost is one orbit
of length ~q_depth per sample point.
"""

from dataclasses import dataclass
from fractions import Fraction

from mpmath import mp, mpf

from .contfrac import ConvergentTable
from .errors import BracketFailure, InvariantViolation, PrecisionExhausted, RationalRotation
from .maps import pl_map, rotation, to_mpf
from .precision import frac1


class LiftOrbitCache:
    """Incrementally extended lift orbit of one sample point."""

    __slots__ = ("f", "values")

    def __init__(self, f, x0):
        self.f = f
        self.values = [to_mpf(x0)]

    def value(self, k):
        while len(self.values) <= k:
            self.values.append(self.f.lift(self.values[-1]))
        return self.values[k]


def _sample_points(f, count):
    pts = [frac1(mpf(2 * i + 1) / (2 * count)) for i in range(count)]
    try:
        pts.extend(b.location_mpf for b in f.break_points())
    except NotImplementedError:
        pass
    return pts


def _build_caches(f, samples):
    return [LiftOrbitCache(f, x) for x in _sample_points(f, samples)]


def _certified_sign(caches, p, q, tol):
    """Sampled sign of rho - p/q; raises RationalRotation on a vanishing gap."""
    vals = [c.value(q) - c.values[0] - p for c in caches]
    lo, hi = min(vals), max(vals)
    if lo > tol:
        return 1
    if hi < -tol:
        return -1
    raise RationalRotation(p, q)


def _zero_tolerance():
    return mpf(2) ** (-(mp.prec // 2))


def rotation_number(f, depth, samples=17):
    """Certified partial quotients of rho(f) and a point estimate.

    Returns (alpha, table) where alpha is the midpoint of the final
    certified sandwich interval and the table expands exactly the
    certified quotients.
    """
    caches = _build_caches(f, samples)
    tol = _zero_tolerance()
    p2, q2, p1, q1 = 1, 0, 0, 1
    quotients = []
    for n in range(1, depth + 1):
        target = -1 if n % 2 else 1
        a = 1
        while True:
            s = _certified_sign(caches, a * p1 + p2, a * q1 + q2, tol)
            if s != target:
                break
            a += 1
        a_n = a - 1
        if a_n < 1:
            raise InvariantViolation(f"inconsistent sign tests at quotient {n}")
        quotients.append(a_n)
        p2, q2, p1, q1 = p1, q1, a_n * p1 + p2, a_n * q1 + q2
    lo = mpf(p1) / q1
    hi = mpf(p1 + p2) / (q1 + q2)
    alpha = (lo + hi) / 2
    table = ConvergentTable(alpha, quotients)
    table.validate()
    return alpha, table


def certify_prefix(f, quotients, samples=17):
    """Verify that rho(f) has exactly the given partial-quotient prefix.

    Each level runs two sign tests: the convergent must sit on the
    expected side and the next semiconvergent must have crossed.
    """
    caches = _build_caches(f, samples)
    tol = _zero_tolerance()
    p2, q2, p1, q1 = 1, 0, 0, 1
    for n, a_n in enumerate(quotients, start=1):
        target = -1 if n % 2 else 1
        s = _certified_sign(caches, a_n * p1 + p2, a_n * q1 + q2, tol)
        if s != target:
            raise InvariantViolation(f"quotient {n} rejected: convergent on wrong side")
        s = _certified_sign(caches, (a_n + 1) * p1 + p2, (a_n + 1) * q1 + q2, tol)
        if s == target:
            raise InvariantViolation(f"quotient {n} rejected: semiconvergent not crossed")
        p2, q2, p1, q1 = p1, q1, a_n * p1 + p2, a_n * q1 + q2
    return True


def compare_to_target(f, target_table, depth, samples=17):
    """Position of rho(f) against the target: -1 below, +1 above, 0 matched.

    0 means the first `depth` partial quotients of rho(f) equal the
    target's, certified by sign tests.
    """
    if depth > target_table.depth:
        raise ValueError("target table is too shallow for the requested depth")
    caches = _build_caches(f, samples)
    tol = _zero_tolerance()
    p, q = target_table.p, target_table.q
    for n in range(1, depth + 1):
        expected = -1 if n % 2 else 1
        try:
            s = _certified_sign(caches, p[n], q[n], tol)
        except RationalRotation:
            return -expected
        if s != expected:
            return s
        a_n = target_table.quotient(n)
        # reject fraction ((a_n+1) p_{n-1} + p_{n-2}) / ((a_n+1) q_{n-1} + q_{n-2})
        if n >= 2:
            rp = (a_n + 1) * p[n - 1] + p[n - 2]
            rq = (a_n + 1) * q[n - 1] + q[n - 2]
        else:
            rp, rq = 1, a_n + 1
        try:
            s = _certified_sign(caches, rp, rq, tol)
        except RationalRotation:
            return expected
        if s != -expected:
            return s
    return 0


@dataclass
class AdditivePLFamily:
    """Family t -> (piecewise-affine lift) + t; rho is nondecreasing in t."""

    break_slopes: list

    def at(self, t):
        return pl_map(self.break_slopes, shift=t)


class RotationFamily:
    def at(self, t):
        return rotation(to_mpf(t))


def tune_to_rotation(family, target_table, depth, bracket, samples=17):
    """Bisect the family parameter until rho matches the target prefix.

    The returned t carries a certificate: compare_to_target(family.at(t))
    reported a full prefix match at the requested depth.
    """
    at = family.at if hasattr(family, "at") else family
    lo, hi = to_mpf(bracket[0]), to_mpf(bracket[1])
    c_lo = compare_to_target(at(lo), target_table, depth, samples)
    if c_lo == 0:
        return lo
    c_hi = compare_to_target(at(hi), target_table, depth, samples)
    if c_hi == 0:
        return hi
    if not (c_lo < 0 < c_hi):
        raise BracketFailure(f"bracket sides compare as ({c_lo}, {c_hi}); need (-1, +1)")
    min_width = mpf(2) ** (16 - mp.prec)
    while hi - lo > min_width:
        mid = (lo + hi) / 2
        c = compare_to_target(at(mid), target_table, depth, samples)
        if c == 0:
            return mid
        if c < 0:
            lo = mid
        else:
            hi = mid
    raise PrecisionExhausted("bisection interval shrank below 2^(16 - precision)")


def quotients_prefix(table, depth):
    """First `depth` quotients of a table (helper for certification calls)."""
    return list(table.quotients[:depth])
