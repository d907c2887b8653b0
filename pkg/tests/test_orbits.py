from fractions import Fraction as F

import pytest
from mpmath import mp, mpf

from circlelab.canonical import three_break_connection_map
from circlelab.contfrac import GOLDEN
from circlelab.errors import AmbiguousMatch, InvariantViolation
from circlelab.maps import compose, invert, iterate, pl_map, rotation, to_mpf
from circlelab.orbits import (
    JumpSystem,
    analyze_orbits,
    break_equivalent,
    free_positions,
    jump_system,
    jump_system_nullspace,
    make_adjuster,
    reduce_to_distinct_orbits,
    same_orbit,
    transfer_jump,
    verify_rank,
)
from circlelab.precision import small_arc


def test_same_orbit_rotation_offsets(rot):
    alpha = GOLDEN.to_mpf()
    assert same_orbit(rot, mpf(0), (3 * alpha) % 1, 10, mpf("1e-8")) == 3
    assert same_orbit(rot, mpf("0.3"), mpf("0.3"), 5, mpf("1e-8")) == 0


def test_same_orbit_none_with_brute_force_oracle(rot):
    # oracle: the minimum distance of 50 orbit points to 0.5 exceeds the
    # tolerance by a wide margin
    from circlelab.maps import backward_orbit, orbit

    pts = orbit(rot, mpf(0), 51) + backward_orbit(rot, mpf(0), 51)
    closest = min(small_arc(p, mpf("0.5")) for p in pts)
    assert closest > mpf("1e-6")
    assert same_orbit(rot, mpf(0), mpf("0.5"), 50, mpf("1e-10")) is None


def test_same_orbit_ambiguous_with_loose_tolerance(rot):
    with pytest.raises(AmbiguousMatch):
        same_orbit(rot, mpf(0), mpf("0.5"), 30, mpf("0.2"))


def test_analyze_witness_two_singular_singletons(witness):
    report = analyze_orbits(witness, 40, mpf("1e-8"))
    assert len(report.connections) == 2
    assert all(c.window == (0, 0) for c in report.connections)
    products = sorted(F(c.product) for c in report.connections)
    assert products == [F(1, 3), F(3)]
    assert not report.d_property
    assert report.total_product == 1
    assert len(report.singular_connections) == 2


def test_analyze_oracle_paired_trivial_connections(oracle):
    report = analyze_orbits(oracle, 30, mpf("1e-6"))
    assert len(report.connections) == 2
    assert all(c.window == (0, 1) for c in report.connections)
    assert all(F(c.product) == 1 for c in report.connections)
    assert report.d_property


def test_analyze_rotation_vacuous(rot):
    report = analyze_orbits(rot, 20, mpf("1e-8"))
    assert report.connections == []
    assert report.d_property
    assert report.total_product == 1


def test_adjuster_frozen_interpolation_example():
    adj = make_adjuster(F(1, 2), F(1, 8), F(1, 3), s_plus=F(3, 2))
    assert (adj.s_minus, adj.s_plus) == (F(1, 2), F(3, 2))
    quads = [p for p in adj.map.pieces if p.kind == "quadratic"]
    assert [p.coeffs[2] for p in quads] == [F(-4), F(-4)]
    dl, dr = adj.map.one_sided_derivatives(mpf("0.5"))
    assert F(dl) / F(dr) == F(1, 3)
    # endpoint derivatives of the two arcs
    assert adj.map.one_sided_derivatives(mpf("0.375"))[1] == F(3, 2)
    assert adj.map.one_sided_derivatives(mpf("0.625"))[0] == F(1, 2)
    assert adj.map.derivative_bounds()[0] > 0


def test_adjuster_rule_sigma_four():
    adj = make_adjuster(F(1, 2), F(1, 16), F(4))
    assert F(adj.s_minus) / F(adj.s_plus) == 4
    assert 0 < adj.s_plus < 2 and 0 < adj.s_minus < 2


def test_adjuster_sigma_one_is_identity():
    adj = make_adjuster(F(1, 2), F(1, 16), F(1))
    assert len(adj.map.pieces) == 1
    assert adj.map.evaluate(mpf("0.3")) == mpf("0.3")


def finite_difference_jump(f, x, h=None):
    if h is None:
        h = mpf(2) ** -80
    x = to_mpf(x)
    left = (f.lift(x) - f.lift(x - h)) / h
    right = (f.lift(x + h) - f.lift(x)) / h
    return left / right


def test_conjugation_jump_law_by_finite_differences(witness):
    k = make_adjuster(mpf("0.31"), mpf("0.01"), F(2, 3))
    big = compose(compose(k.map, witness), invert(k.map))
    for x, tol in ((mpf(0), mpf("1e-8")), (mpf("0.31"), mpf("1e-8")), (mpf("0.7"), mpf("1e-10"))):
        kx = k.map.evaluate(x)
        law = k.map.jump_at(witness.evaluate(x)) * witness.jump_at(x) / k.map.jump_at(x)
        fd = finite_difference_jump(big, kx)
        assert abs(mp.log(fd / to_mpf(law))) < tol
        assert abs(mp.log(to_mpf(big.jump_at(kx)) / to_mpf(law))) < mpf("1e-30")


def test_transfer_forward_merges_and_finite_difference_agrees():
    g2, conn = three_break_connection_map()
    jumps = [to_mpf(g2.jump_at(x)) for x in conn]
    assert abs(mp.log(jumps[0] * jumps[1] * jumps[2] / 3)) < mpf("1e-40")
    big, adj = transfer_jump(g2, conn[0], +1, mpf("0.0008"))
    assert abs(mp.log(to_mpf(big.jump_at(conn[0])))) < mpf("1e-12")
    merged = big.jump_at(conn[1])
    assert abs(mp.log(to_mpf(merged) / to_mpf(jumps[0] * jumps[1]))) < mpf("1e-12")
    fd = finite_difference_jump(big, conn[1])
    assert abs(mp.log(fd / to_mpf(merged))) < mpf("1e-8")


def test_transfer_requires_a_break(witness):
    with pytest.raises(InvariantViolation):
        transfer_jump(witness, mpf("0.123"), +1, mpf("0.001"))


def test_transfer_backward_direction(witness):
    pre = invert(witness).evaluate(mpf(0))
    big, _ = transfer_jump(witness, mpf(0), -1, mpf("0.004"))
    assert abs(mp.log(to_mpf(big.jump_at(mpf(0))))) < mpf("1e-12")
    assert abs(mp.log(to_mpf(big.jump_at(pre)) / 3)) < mpf("1e-12")


def test_reduce_distinct_orbit_map_is_noop(witness):
    result = reduce_to_distinct_orbits(witness, 40, mpf("1e-8"))
    assert result.chain == []
    assert result.map is witness


def test_per_orbit_product_invariant_under_transfer():
    # nontrivial per-orbit products survive a transfer unchanged; the
    # adjuster may add fresh trivial-product pairs at its support edges
    g2, conn = three_break_connection_map()
    before = analyze_orbits(g2, 40, mpf("1e-8"))
    big, _ = transfer_jump(g2, conn[0], +1, mpf("0.0008"))
    after = analyze_orbits(big, 40, mpf("1e-8"))
    pis_before = sorted(float(to_mpf(c.product)) for c in before.singular_connections)
    pis_after = sorted(float(to_mpf(c.product)) for c in after.singular_connections)
    assert pis_before == pytest.approx(pis_after, abs=1e-12)
    assert all(abs(float(to_mpf(c.product)) - 1) < 1e-10
               for c in after.connections if not c.is_singular())


def identity_conjugacy():
    return pl_map([(0, F(1))])


def test_break_equivalent_identity(witness):
    verdict = break_equivalent(witness, witness, identity_conjugacy(), 40, mpf("1e-8"))
    assert verdict.equivalent


def test_break_equivalent_rotation_conjugate(witness):
    r = rotation(F(1, 4))
    g = compose(compose(r, witness), invert(r))
    verdict = break_equivalent(witness, g, r, 40, mpf("1e-8"))
    assert verdict.equivalent
    assert all(m["offset"] == 0 for m in verdict.matches)


def test_break_equivalent_cardinality_mismatch(witness, rot):
    verdict = break_equivalent(witness, rot, identity_conjugacy(), 40, mpf("1e-8"))
    assert not verdict.equivalent
    assert verdict.witness["reason"] == "cardinality"
    assert (verdict.witness["card_f"], verdict.witness["card_g"]) == (2, 0)


def test_jump_system_invariants_and_tampering():
    system = jump_system(2, {pos: 1 for pos in free_positions(2)})
    assert system.validate()
    bad = JumpSystem(2, [row[:] for row in system.matrix])
    bad.matrix[1][1] = 1  # row (i=0,k=1) must carry 0 in column k
    with pytest.raises(InvariantViolation):
        bad.validate()


def test_jump_system_ranks_small():
    assert jump_system_nullspace(jump_system(1))[0] == 2
    assert free_positions(1) == []
    report = verify_rank(2)
    assert report == {"q": 2, "fillings": 64, "min_rank": 3, "max_rank": 3,
                      "all_full_rank": True}
    sampled = verify_rank(3, sample_count=2000, seed=7)
    assert sampled["min_rank"] == 4 and sampled["all_full_rank"]


def test_analyze_is_deterministic(witness):
    a = analyze_orbits(witness, 40, mpf("1e-8"))
    b = analyze_orbits(witness, 40, mpf("1e-8"))
    assert a.to_json_dict() == b.to_json_dict()
