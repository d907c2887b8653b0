import pytest
from mpmath import mpf

from circlelab.contfrac import GOLDEN, circle_distance
from circlelab.errors import DepthBeyondPrecision, EvenDepthWithoutReversal
from circlelab.maps import iterate, orbit
from circlelab.partition import (
    arcs_overlap_interior,
    build_partition,
    check_refinement,
    decay_profile,
    overlap_level_mixed,
    overlap_reverse,
    phi_bijection,
)
from circlelab.precision import arc_length, small_arc, working_precision


def test_golden_depth3_is_five_orbit_intervals(rot, gtable):
    part = build_partition(rot, gtable, mpf(0), 3)
    assert part.q_prev == 2 and part.q_cur == 3
    assert len(part.intervals) == 5
    alpha = GOLDEN.to_mpf()
    for k, p in enumerate(part.orbit):
        assert small_arc(p, (k * alpha) % 1) < mpf(2) ** -200


def test_rotation_long_intervals_have_return_length(rot, gtable):
    for n in (3, 5, 7):
        part = build_partition(rot, gtable, mpf(0), n)
        want = circle_distance(GOLDEN, gtable.q[n - 1])
        for itv in part.intervals:
            if itv.level == "long":
                assert abs(itv.length - want) < mpf(2) ** -200


def test_witness_partition_builds_to_depth_nine(witness, gtable):
    part = build_partition(witness, gtable, mpf(0), 9)
    assert part.max_length() < 1
    assert len(part.intervals) == gtable.q[9] + gtable.q[8]


def test_phi_bijection_formula():
    assert phi_bijection(1, 3, 5) == 3
    assert phi_bijection(4, 3, 5) == 1
    values = {phi_bijection(i, 3, 5) for i in range(5)}
    assert values == set(range(5))


def test_locate_base_point_is_long_zero(witness, gtable):
    part = build_partition(witness, gtable, mpf("0.3"), 7)
    loc = part.locate(mpf("0.3"))
    assert loc.i_n == 0 and loc.side == "long"


def test_locate_matches_brute_force(rot, gtable):
    import random

    part = build_partition(rot, gtable, mpf(0), 7)
    rng = random.Random(11)
    for _ in range(60):
        x = mpf(rng.random())
        fast = part.locate(x)
        slow = part.locate_brute(x)
        assert (fast.i_n, fast.side) == (slow.i_n, slow.side)
        assert fast.phi_n_of_i == slow.phi_n_of_i


def test_refinement_chain(rot, witness, gtable):
    for m in (rot, witness):
        parts = {n: build_partition(m, gtable, mpf(0), n) for n in range(3, 11)}
        for n in range(3, 10):
            assert check_refinement(parts[n], parts[n + 1])


def test_even_depth_direct_and_disabled(rot, gtable):
    part = build_partition(rot, gtable, mpf(0), 4)
    assert len(part.intervals) == gtable.q[4] + gtable.q[3]
    with pytest.raises(EvenDepthWithoutReversal):
        build_partition(rot, gtable, mpf(0), 4, reverse_even=False)


def test_overlap_index_sets_at_golden_depth_three(gtable):
    # q_{n-1}=2, q_n=3, q_{n+1}=5, a_{n+1}=1
    mixed = [k for k in range(gtable.q[4] + gtable.q[3]) if overlap_level_mixed(k, 3, gtable)]
    assert mixed == [2, 5, 7]
    reverse = [k for k in range((gtable.quotient(4) + 2) * gtable.q[3])
               if overlap_reverse(k, 3, gtable)]
    assert reverse == [3, 6, 8]
    assert not overlap_level_mixed(0, 3, gtable)
    assert not overlap_reverse(1, 5, gtable)


def geometric_mixed(f, c, k, n, table):
    pts = orbit(f, c, table.q[n + 1] + 2 * table.q[n] + table.q[n - 1] + 1)
    qp, qc = table.q[n - 1], table.q[n]
    return arcs_overlap_interior(pts[0], pts[qp], pts[qc + k], pts[k])


def geometric_reverse(f, c, k, n, table):
    a_next = table.quotient(n + 1)
    pts = orbit(f, c, (a_next + 2) * table.q[n] + table.q[n - 1] + table.q[n] + 1)
    qp, qc = table.q[n - 1], table.q[n]
    return arcs_overlap_interior(pts[k], pts[k + qp], pts[qc], pts[0])


@pytest.mark.parametrize("n", [3, 5])
def test_overlap_predicates_match_geometry(rot, witness, gtable, n):
    for f in (rot, witness):
        for k in range(gtable.q[n + 1] + gtable.q[n]):
            assert overlap_level_mixed(k, n, gtable) == geometric_mixed(f, mpf(0), k, n, gtable)
        for k in range((gtable.quotient(n + 1) + 2) * gtable.q[n]):
            assert overlap_reverse(k, n, gtable) == geometric_reverse(f, mpf(0), k, n, gtable)


def test_two_base_dichotomy(rot, witness, gtable):
    # intervals from bases y1 and y2 = f^{q_{n-1}}(y1) overlap only for
    # j = i - q_{n-1} or j = q_n - q_{n-1} + i
    n = 5
    qp, qc = gtable.q[n - 1], gtable.q[n]
    for f in (rot, witness):
        y1 = mpf("0.1")
        pts = orbit(f, y1, qc + 2 * qp + 1)
        for i in range(qc):
            for j in range(qc):
                a = arcs_overlap_interior(pts[i], pts[i + qp], pts[j + qp], pts[j + 2 * qp])
                expected = (j == i - qp and qp <= i < qc) or (j == qc - qp + i and 0 <= i < qp)
                assert a == expected, (i, j)


def test_decay_rotation_explicit_constant(rot, gtable):
    records, slope, log_lambda = decay_profile(rot, gtable, mpf(0), range(2, 16))
    for n, length in records:
        assert length <= 2 * mpf(2) ** (-mpf(n) / 2)
        assert abs(length - circle_distance(GOLDEN, gtable.q[n - 1])) < mpf(2) ** -200
    assert slope <= log_lambda + 0.05


def test_partition_fails_loudly_at_precision_floor(rot):
    from circlelab.contfrac import cf_expand

    with working_precision(20):
        table = cf_expand(GOLDEN, 12)
        from circlelab.maps import rotation

        r = rotation(GOLDEN)
        with pytest.raises(DepthBeyondPrecision):
            for n in range(5, 12, 2):
                build_partition(r, table, mpf(0), n)
