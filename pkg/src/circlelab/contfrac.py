"""Continued fractions, convergents, and exact quadratic irrationals.

Rotation numbers enter the lab in three forms: decimal strings (exact
rationals), ``surd(d,b,c)`` meaning (-b+sqrt(d))/c, and quotient lists
``[a1,a2,...]`` giving the periodically repeated expansion. Surds and
quotient lists expand exactly at any depth; rationals terminate; mpf
values expand until the residual hits the precision horizon.
"""

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

from mpmath import mp, mpf

from .errors import DepthUnreachable, InvariantViolation, RationalDetected
from .precision import frac1


def _sign_a_plus_sqrt(a, d):
    """Exact sign of a + sqrt(d) for integers a and nonsquare d > 0."""
    if a >= 0:
        return 1
    return 1 if d > a * a else -1


class QuadraticSurd:
    """Exact value (P + sqrt(D))/Q with D > 0 nonsquare and Q | (D - P^2)."""

    __slots__ = ("P", "D", "Q")

    def __init__(self, P, D, Q):
        if Q == 0:
            raise ValueError("zero denominator")
        if D <= 0 or math.isqrt(D) ** 2 == D:
            raise ValueError("D must be positive and nonsquare")
        if (D - P * P) % Q != 0:
            P, D, Q = P * abs(Q), D * Q * Q, Q * abs(Q)
        self.P, self.D, self.Q = P, D, Q

    @classmethod
    def from_surd_spec(cls, d, b, c):
        """Build (-b + sqrt(d))/c."""
        return cls(-b, d, c)

    @classmethod
    def from_periodic_quotients(cls, block):
        """Value of the purely periodic expansion repeating ``block``."""
        if not block or any(a < 1 for a in block):
            raise ValueError("quotient block must be positive integers")
        # x = 1/(a1 + 1/(a2 + ... 1/(ak + x))): fold the homographies.
        m11, m12, m21, m22 = 1, 0, 0, 1
        for a in block:
            m11, m12, m21, m22 = m12, m11 + a * m12, m22, m21 + a * m22
        # m21 x^2 + (m22 - m11) x - m12 = 0, positive root.
        disc = (m22 - m11) ** 2 + 4 * m21 * m12
        return cls(m11 - m22, disc, 2 * m21)

    def to_mpf(self):
        return (mpf(self.P) + mp.sqrt(self.D)) / mpf(self.Q)

    def compare_fraction(self, other):
        """Exact sign of self - other for a Fraction or integer."""
        other = Fraction(other)
        p, q = other.numerator, other.denominator
        a = self.P * q - p * self.Q
        s = _sign_a_plus_sqrt(a, self.D * q * q)
        return s if self.Q > 0 else -s

    def _cmp_int(self, t):
        """Sign of self - t for integer t."""
        a = self.P - t * self.Q
        s = _sign_a_plus_sqrt(a, self.D)
        return s if self.Q > 0 else -s

    def floor(self):
        est = (self.P + math.isqrt(self.D)) // self.Q
        while self._cmp_int(est + 1) >= 0:
            est += 1
        while self._cmp_int(est) < 0:
            est -= 1
        return est

    def cf_quotients(self, depth):
        """First ``depth`` partial quotients of the expansion (integer part dropped)."""
        P, D, Q = self.P, self.D, self.Q
        out = []
        x = QuadraticSurd(P, D, Q)
        a0 = x.floor()
        P = a0 * Q - P
        Q = (D - P * P) // Q
        for _ in range(depth):
            x = QuadraticSurd(P, D, Q)
            a = x.floor()
            out.append(a)
            P = a * Q - P
            Q = (D - P * P) // Q
        if a0 != 0:
            raise ValueError("expected a value in (0,1)")
        return out

    def __repr__(self):
        return f"QuadraticSurd(({self.P}+sqrt({self.D}))/{self.Q})"


GOLDEN = QuadraticSurd.from_surd_spec(5, 1, 2)
SILVER = QuadraticSurd.from_surd_spec(2, 1, 1)

_SURD_RE = re.compile(r"^surd\(\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\)$")
_LIST_RE = re.compile(r"^\[\s*\d+(\s*,\s*\d+)*\s*\]$")


def parse_rotation_spec(spec):
    """Parse a rotation-number spec into an exact value or mpf.

    Accepts decimal strings (exact rationals), ``surd(d,b,c)``, and
    quotient lists ``[a1,a2,...]`` repeated periodically.
    """
    if isinstance(spec, (Fraction, QuadraticSurd)):
        return spec
    if isinstance(spec, mpf):
        return spec
    if isinstance(spec, str):
        s = spec.strip()
        m = _SURD_RE.match(s)
        if m:
            d, b, c = (int(g) for g in m.groups())
            return QuadraticSurd.from_surd_spec(d, b, c)
        if _LIST_RE.match(s):
            block = [int(t) for t in s.strip("[] \t").split(",")]
            return QuadraticSurd.from_periodic_quotients(block)
        return Fraction(s)
    raise ValueError(f"unsupported rotation spec: {spec!r}")


def quotients_to_fraction(quotients):
    """Exact value of the finite expansion [a1, ..., aN]."""
    value = Fraction(0)
    for a in reversed(quotients):
        value = Fraction(1, a + value)
    return value


@dataclass
class ConvergentTable:
    """Partial quotients and convergents p_n/q_n of a rotation number.

    Lists p and q are indexed from 0 with p0/q0 = 0/1 and q1 = a1; the
    quotients list holds a1..aN.
    """

    alpha: object
    quotients: list
    p: list = field(default_factory=list)
    q: list = field(default_factory=list)

    def __post_init__(self):
        if not self.p:
            p, q = [0, 1], [1, self.quotients[0]]
            for a in self.quotients[1:]:
                p.append(a * p[-1] + p[-2])
                q.append(a * q[-1] + q[-2])
            self.p, self.q = p, q

    @property
    def depth(self):
        return len(self.quotients)

    def alpha_mpf(self):
        a = self.alpha
        if isinstance(a, QuadraticSurd):
            return a.to_mpf()
        if isinstance(a, Fraction):
            return mpf(a.numerator) / a.denominator
        return mpf(a)

    def convergent(self, n):
        return Fraction(self.p[n], self.q[n])

    def quotient(self, n):
        """Partial quotient a_n (1-indexed)."""
        return self.quotients[n - 1]

    def sign(self, n):
        """Exact-where-possible sign of q_n * alpha - p_n."""
        if n == 0:
            return 1
        a = self.alpha
        if isinstance(a, QuadraticSurd):
            return a.compare_fraction(self.convergent(n))
        if isinstance(a, Fraction):
            diff = a - self.convergent(n)
            return (diff > 0) - (diff < 0)
        diff = self.q[n] * mpf(a) - self.p[n]
        return 1 if diff > 0 else -1

    def truncated(self, depth):
        if depth > self.depth:
            raise ValueError("cannot deepen a table by truncation")
        return ConvergentTable(self.alpha, self.quotients[:depth])

    def validate(self):
        """Check the defining invariants, raising InvariantViolation on failure."""
        p, q, n_max = self.p, self.q, self.depth
        if q[0] != 1 or q[1] != self.quotients[0] or p[0] != 0 or p[1] != 1:
            raise InvariantViolation("convergent seed values are wrong")
        for n in range(2, n_max + 1):
            a = self.quotients[n - 1]
            if q[n] != a * q[n - 1] + q[n - 2] or p[n] != a * p[n - 1] + p[n - 2]:
                raise InvariantViolation(f"recursion fails at n={n}")
        for n in range(1, n_max + 1):
            if math.gcd(p[n], q[n]) != 1:
                raise InvariantViolation(f"p_{n}/q_{n} not reduced")
        # a fully expanded rational reaches its own final convergent, where
        # the strict sign and approximation inequalities degenerate
        terminal = isinstance(self.alpha, Fraction) and self.convergent(n_max) == self.alpha
        for n in range(n_max - 1 if terminal else n_max):
            if self.sign(n) * self.sign(n + 1) >= 0:
                raise InvariantViolation(f"sign of q_n*alpha - p_n fails to alternate at n={n}")
        for n in range(1, n_max):
            if not self._approx_ok(n, allow_equal=terminal and n == n_max - 1):
                raise InvariantViolation(f"|alpha - p_{n}/q_{n}| >= 1/(q_{n} q_{n+1})")
        return True

    def _approx_ok(self, n, allow_equal=False):
        bound = Fraction(1, self.q[n] * self.q[n + 1])
        conv = self.convergent(n)
        a = self.alpha
        if isinstance(a, QuadraticSurd):
            lo = a.compare_fraction(conv - bound)
            hi = a.compare_fraction(conv + bound)
            return lo > 0 > hi
        if isinstance(a, Fraction):
            return abs(a - conv) <= bound if allow_equal else abs(a - conv) < bound
        err = abs(mpf(a) - mpf(conv.numerator) / conv.denominator)
        return err < mpf(bound.numerator) / bound.denominator


def _expand_fraction(value, depth):
    num, den = value.numerator, value.denominator
    if not 0 < num < den:
        raise ValueError("alpha must lie in (0,1)")
    quotients = []
    r, s = den, num
    while s != 0 and len(quotients) < depth:
        a = r // s
        quotients.append(a)
        r, s = s, r - a * s
    if len(quotients) < depth:
        raise RationalDetected(
            f"expansion terminates after {len(quotients)} quotients; "
            f"alpha equals the rational exactly"
        )
    return quotients


def _expand_mpf(value, depth):
    x = mpf(value)
    if not 0 < x < 1:
        raise ValueError("alpha must lie in (0,1)")
    horizon = mpf(2) ** (-(mp.prec // 2))
    quotients = []
    q_prev, q_cur = 1, 0
    for _ in range(depth):
        if x == 0:
            raise RationalDetected("residual vanished; alpha indistinguishable from a rational")
        if x < horizon:
            raise DepthUnreachable(
                f"residual {mp.nstr(x, 6)} below precision horizon after "
                f"{len(quotients)} quotients"
            )
        y = 1 / x
        a = int(mp.floor(y))
        quotients.append(a)
        q_prev, q_cur = q_cur, a * max(q_cur, 1) + q_prev
        if q_cur > 2 ** (mp.prec // 2):
            raise DepthUnreachable(
                f"denominator q={q_cur} exceeds the precision budget after "
                f"{len(quotients)} quotients"
            )
        x = y - a
    return quotients


def cf_expand(alpha, depth):
    """Expand alpha in (0,1) to the requested depth and return its table.

    Exact inputs (surds, quotient lists) expand exactly; rationals raise
    RationalDetected when exhausted; mpf inputs raise DepthUnreachable at
    the precision horizon.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    value = parse_rotation_spec(alpha) if isinstance(alpha, str) else alpha
    if isinstance(value, QuadraticSurd):
        quotients = value.cf_quotients(depth)
    elif isinstance(value, Fraction):
        quotients = _expand_fraction(value, depth)
    else:
        value = mpf(value)
        quotients = _expand_mpf(value, depth)
    table = ConvergentTable(value, quotients)
    table.validate()
    return table


def circle_distance(alpha, q):
    """Distance of q*alpha to the nearest integer, in [0, 1/2]."""
    if isinstance(alpha, str):
        alpha = parse_rotation_spec(alpha)
    if isinstance(alpha, QuadraticSurd):
        x = alpha.to_mpf()
    elif isinstance(alpha, Fraction):
        x = mpf(alpha.numerator) / alpha.denominator
    else:
        x = mpf(alpha)
    t = frac1(q * x)
    return t if t <= mpf("0.5") else 1 - t


@dataclass
class BoundedTypeReport:
    is_bounded: bool
    max_quotient: int
    depth_checked: int


def is_bounded_type(table, bound):
    """Bounded-type check over the expanded prefix only.

    The verdict never claims anything about unexpanded quotients; callers
    needing the full Diophantine classification are out of luck at finite
    depth.
    """
    if table.depth < 1:
        raise ValueError("table must hold at least one quotient")
    biggest = max(table.quotients)
    return BoundedTypeReport(
        is_bounded=biggest <= bound,
        max_quotient=biggest,
        depth_checked=table.depth,
    )
