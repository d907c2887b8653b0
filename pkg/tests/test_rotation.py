from fractions import Fraction as F

import pytest
from mpmath import mpf

from circlelab.canonical import (
    BASE_BREAK_SLOPES,
    PARTNER_BREAK_SLOPES,
    PARTNER_SHIFT,
    TUNED_PREFIX_DEPTH,
    WITNESS_SHIFT,
)
from circlelab.contfrac import GOLDEN, cf_expand
from circlelab.errors import BracketFailure, RationalRotation
from circlelab.maps import pl_map, rotation
from circlelab.rotation import (
    AdditivePLFamily,
    RotationFamily,
    certify_prefix,
    compare_to_target,
    rotation_number,
    tune_to_rotation,
)


def test_rotation_number_of_golden_rotation():
    alpha, table = rotation_number(rotation(GOLDEN), 10)
    assert table.quotients == [1] * 10
    assert abs(alpha - GOLDEN.to_mpf()) < mpf(1) / (table.q[10] * table.q[9])


def test_rotation_number_conjugation_invariant(oracle):
    _, table = rotation_number(oracle, 8)
    assert table.quotients == [1] * 8


def test_rational_rotation_detected():
    with pytest.raises(RationalRotation):
        rotation_number(rotation(F(1, 2)), 3)


def test_frozen_witness_shift_certifies(witness):
    assert certify_prefix(witness, [1] * TUNED_PREFIX_DEPTH)


def test_frozen_partner_shift_certifies(partner):
    assert certify_prefix(partner, [1] * TUNED_PREFIX_DEPTH)


def test_tune_rotation_family_converges_to_golden(gtable):
    t = tune_to_rotation(RotationFamily(), gtable, 10, (mpf("0.5"), mpf("0.7")))
    width = mpf(1) / (gtable.q[10] * gtable.q[11])
    assert abs(t - GOLDEN.to_mpf()) < width


def test_tune_additive_family_live(gtable):
    family = AdditivePLFamily(list(BASE_BREAK_SLOPES))
    t = tune_to_rotation(family, gtable, 8, (mpf("0.3"), mpf("0.95")))
    assert certify_prefix(family.at(t), [1] * 8)
    # the frozen constant lies inside the window the live tuning found
    assert compare_to_target(family.at(WITNESS_SHIFT), gtable, 8) == 0


def test_bracket_failure():
    family = RotationFamily()
    with pytest.raises(BracketFailure):
        tune_to_rotation(family, cf_expand(GOLDEN, 10), 6, (mpf("0.1"), mpf("0.2")))


def test_monotone_rotation_number_on_grid(gtable):
    family = AdditivePLFamily(list(BASE_BREAK_SLOPES))
    values = []
    for t in ("0.35", "0.55", "0.75", "0.9"):
        alpha, _ = rotation_number(family.at(mpf(t)), 5)
        values.append(alpha)
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_compare_to_target_sides(gtable):
    assert compare_to_target(rotation(mpf("0.55")), gtable, 8) == -1
    assert compare_to_target(rotation(mpf("0.7")), gtable, 8) == 1
    assert compare_to_target(rotation(GOLDEN), gtable, 10) == 0


def test_partner_jumps_are_nine(partner):
    jumps = sorted(F(b.jump) for b in partner.break_points())
    assert jumps == [F(1, 9), F(9)]
