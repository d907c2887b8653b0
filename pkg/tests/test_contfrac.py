from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from circlelab.contfrac import (
    GOLDEN,
    SILVER,
    BoundedTypeReport,
    ConvergentTable,
    QuadraticSurd,
    cf_expand,
    circle_distance,
    is_bounded_type,
    parse_rotation_spec,
    quotients_to_fraction,
)
from circlelab.errors import DepthUnreachable, RationalDetected
from circlelab.precision import working_precision


def fibonacci(count):
    out = [1, 1]
    while len(out) < count:
        out.append(out[-1] + out[-2])
    return out[:count]


def test_golden_expansion_all_ones_and_fibonacci():
    table = cf_expand(GOLDEN, 30)
    assert table.quotients == [1] * 30
    assert table.q == fibonacci(31)
    table.validate()


def test_golden_approximation_inequality_exact():
    table = cf_expand(GOLDEN, 30)
    for n in range(1, 30):
        bound = Fraction(1, table.q[n] * table.q[n + 1])
        conv = table.convergent(n)
        assert GOLDEN.compare_fraction(conv - bound) > 0
        assert GOLDEN.compare_fraction(conv + bound) < 0


def test_silver_expansion():
    assert cf_expand(SILVER, 6).quotients == [2] * 6


def test_periodic_quotient_list_matches_surd():
    assert cf_expand("[1]", 15).quotients == [1] * 15
    assert cf_expand("[1,2]", 8).quotients == [1, 2, 1, 2, 1, 2, 1, 2]
    assert cf_expand("[2]", 10).quotients == cf_expand(SILVER, 10).quotients


# exact expansion of the truncated golden decimal, frozen from the
# integer Euclid oracle below
TRUNCATED_GOLDEN_CF = [1] * 24 + [5, 2, 1, 1, 4, 1, 10, 36, 2]


def euclid_oracle(num, den):
    out = []
    r, s = den, num
    while s:
        a = r // s
        out.append(a)
        r, s = s, r - a * s
    return out


def test_truncated_decimal_departs_from_all_ones_where_the_oracle_says():
    oracle = euclid_oracle(6180339887, 10**10)
    assert oracle == TRUNCATED_GOLDEN_CF
    assert len(oracle) == 33
    table = cf_expand(Fraction(6180339887, 10**10), 33)
    assert table.quotients == TRUNCATED_GOLDEN_CF
    assert table.quotients[:24] == [1] * 24
    assert table.quotients[24] == 5


def test_truncated_decimal_beyond_horizon_raises():
    with pytest.raises(RationalDetected):
        cf_expand(Fraction(6180339887, 10**10), 40)
    with working_precision(64):
        with pytest.raises((DepthUnreachable, RationalDetected)):
            cf_expand(mpf("0.6180339887"), 40)


def test_circle_distance_rationals():
    assert circle_distance(Fraction(1, 4), 4) == 0
    assert circle_distance(Fraction(1, 4), 2) == mpf("0.5")


def test_circle_distance_golden_thirteen():
    direct = abs(13 * GOLDEN.to_mpf() - 8)
    assert abs(circle_distance(GOLDEN, 13) - direct) < mpf(2) ** -200


def test_bounded_type_reports():
    golden = cf_expand(GOLDEN, 10)
    assert is_bounded_type(golden, 1) == BoundedTypeReport(True, 1, 10)
    table = ConvergentTable(alpha=quotients_to_fraction([1, 2, 7, 1]), quotients=[1, 2, 7, 1])
    report = is_bounded_type(table, 5)
    assert not report.is_bounded
    assert report.max_quotient == 7
    assert is_bounded_type(cf_expand("[2]", 20), 2).is_bounded


def test_rational_exhaustion():
    with pytest.raises(RationalDetected):
        cf_expand(Fraction(1, 2), 2)


def test_parse_rotation_spec_forms():
    assert isinstance(parse_rotation_spec("surd(5,1,2)"), QuadraticSurd)
    assert parse_rotation_spec("0.25") == Fraction(1, 4)
    surd = parse_rotation_spec("[1,1]")
    assert isinstance(surd, QuadraticSurd)
    assert surd.compare_fraction(Fraction(61, 100)) > 0


@given(st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(999, 1000)))
@settings(max_examples=60, deadline=None, derandomize=True)
def test_rational_roundtrip_exact(alpha):
    oracle = euclid_oracle(alpha.numerator, alpha.denominator)
    if len(oracle) < 2:
        return
    table = cf_expand(alpha, len(oracle))
    assert table.quotients == oracle
    assert quotients_to_fraction(table.quotients) == alpha
    assert table.convergent(table.depth) == alpha


@given(st.integers(min_value=2, max_value=400), st.integers(min_value=0, max_value=30),
       st.integers(min_value=1, max_value=9))
@settings(max_examples=60, deadline=None, derandomize=True)
def test_surd_expansion_invariants(d, b, c):
    import math

    if math.isqrt(d) ** 2 == d:
        return
    surd = QuadraticSurd.from_surd_spec(d, b, c)
    if not (surd.compare_fraction(Fraction(1, 1000)) > 0 and surd.compare_fraction(Fraction(999, 1000)) < 0):
        return
    table = cf_expand(surd, 12)
    table.validate()
    for n in range(2, 12):
        assert table.q[n + 1] >= table.q[n] + table.q[n - 1]
        assert table.q[n + 1] > table.q[n]
    for n in range(11):
        assert table.sign(n) * table.sign(n + 1) < 0
