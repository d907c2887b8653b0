"""Working-precision control and wrap-safe circle arithmetic.

All heavy numerics run on mpmath's global context. The default is 256
binary digits; partition intervals shrink geometrically with depth, so the
comparison tolerance is pinned far below the deepest interval length at
2^(8 - precision).
"""

import os
from contextlib import contextmanager

from mpmath import mp, mpf

DEFAULT_PRECISION_BITS = 256
PRECISION_ENV_VAR = "CIRCLELAB_PRECISION_BITS"


def set_precision(bits):
    if bits < 2:
        raise ValueError("precision must be at least 2 bits")
    mp.prec = int(bits)


def get_precision():
    return mp.prec


def default_precision_from_env():
    raw = os.environ.get(PRECISION_ENV_VAR)
    return int(raw) if raw else DEFAULT_PRECISION_BITS


@contextmanager
def working_precision(bits):
    saved = mp.prec
    mp.prec = int(bits)
    try:
        yield
    finally:
        mp.prec = saved


def comparison_tolerance():
    """Tolerance for circle-point comparisons at the current precision."""
    return mpf(2) ** (8 - mp.prec)


def frac1(x):
    """Fractional part in [0, 1)."""
    x = mpf(x)
    return x - mp.floor(x)


def arc_length(a, b):
    """Length of the positively oriented arc from a to b."""
    return frac1(mpf(b) - mpf(a))


def small_arc(a, b):
    """Length of the smaller of the two arcs between a and b."""
    d = arc_length(a, b)
    return d if d <= mpf("0.5") else 1 - d


def in_arc(x, a, b, tol=None):
    """Whether x lies on the closed positively oriented arc from a to b.

    The arc is assumed shorter than the full circle. Endpoints count as
    inside up to tol.
    """
    if tol is None:
        tol = comparison_tolerance()
    span = arc_length(a, b)
    off = arc_length(a, x)
    return off <= span + tol or off >= 1 - tol


def in_open_arc(x, a, b, tol=None):
    """Whether x lies strictly inside the positively oriented arc from a to b."""
    if tol is None:
        tol = comparison_tolerance()
    span = arc_length(a, b)
    off = arc_length(a, x)
    return tol < off < span - tol


def circle_eq(a, b, tol=None):
    """Equality of circle points up to wrap-around."""
    if tol is None:
        tol = comparison_tolerance()
    return small_arc(a, b) <= tol
