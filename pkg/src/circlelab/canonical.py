"""Canonical experiment maps and frozen tuning constants.

The two shifted families below were tuned once by certified bisection to
an 18-quotient golden prefix and the parameters frozen as exact dyadic
rationals; re-certification is cheap and done by the tests. The window
of admissible parameters at that depth is around 2^-250 wide, which is
why the constants are stored exactly rather than as decimals.
"""

from fractions import Fraction

from .contfrac import GOLDEN, cf_expand
from .maps import conjugated_rotation, pl_map, rotation

# shift for slopes (1/2, 3/2) with breaks (0, 1/2); golden prefix depth 18
WITNESS_SHIFT = Fraction(
    21371651048650577164809652651559407382428466801175877832224232462406829421363,
    2**254,
)
# shift for slopes (1/3, 3) with breaks (0, 3/4); golden prefix depth 18
PARTNER_SHIFT = Fraction(
    48616740713260117054731578881794728799901970505006658655862050259333848812749,
    2**255,
)
TUNED_PREFIX_DEPTH = 18

BASE_BREAK_SLOPES = ((Fraction(0), Fraction(1, 2)), (Fraction(1, 2), Fraction(3, 2)))
PARTNER_BREAK_SLOPES = ((Fraction(0), Fraction(1, 3)), (Fraction(3, 4), Fraction(3)))


def golden_rotation():
    return rotation(GOLDEN)


def golden_table(depth=20):
    return cf_expand(GOLDEN, depth)


def base_pl():
    """Two-slope staircase with jumps 3 at 0 and 1/3 at 1/2 (no shift)."""
    return pl_map(list(BASE_BREAK_SLOPES))


def oracle_map():
    """Conjugated rotation with the staircase as retained oracle conjugacy.

    Has golden rotation number by construction, four breaks in two
    orbit-connections, and every per-orbit jump product trivial.
    """
    return conjugated_rotation(GOLDEN, base_pl())


def witness_map():
    """Tuned two-break map with jumps {3, 1/3} on distinct orbits.

    Per-orbit products are nontrivial, so the conjugacy to the golden
    rotation is singular.
    """
    return pl_map(list(BASE_BREAK_SLOPES), shift=WITNESS_SHIFT)


def partner_map():
    """Tuned two-break map with jumps {9, 1/9} on distinct orbits."""
    return pl_map(list(PARTNER_BREAK_SLOPES), shift=PARTNER_SHIFT)


def three_break_connection_map(delta1="0.003", delta2="0.003"):
    """Witness map with its jump-3 break split into three breaks of one orbit.

    Conjugating by adjusters centered at f(0) and f^2(0) spreads the
    product 3 over the offsets {0, 1, 2}; the jump-1/3 break at 1/2 stays
    on its own orbit, and each adjuster leaves a trivial-product pair at
    its support edges. Returns (map, orbit locations of the connection).
    """
    from fractions import Fraction as _F

    from mpmath import mpf

    from .orbits import conjugate_by_adjuster

    f = witness_map()
    e1 = f.evaluate(mpf(0))
    g1, _ = conjugate_by_adjuster(f, e1, _F(1, 2), mpf(delta1), extra_allowed={mpf(0)})
    e2 = g1.evaluate(e1)
    g2, _ = conjugate_by_adjuster(g1, e2, _F(2), mpf(delta2), extra_allowed={e1})
    return g2, [mpf(0), e1, e2]


BUILTIN_MAPS = {
    "golden_rotation": golden_rotation,
    "base_pl": base_pl,
    "oracle_map": oracle_map,
    "witness_map": witness_map,
    "partner_map": partner_map,
}


def builtin_map(name):
    try:
        return BUILTIN_MAPS[name]()
    except KeyError:
        raise KeyError(f"unknown builtin map {name!r}; known: {sorted(BUILTIN_MAPS)}") from None
