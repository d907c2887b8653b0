import random
from fractions import Fraction as F

import pytest
from mpmath import mp, mpf

from circlelab.cells import (
    Thresholds,
    Triple,
    build_primary_cell,
    build_secondary_cell,
    classify_breaks,
    dr,
    dr_power,
    log_df_power,
    ratio,
    relative_position,
    trace_distortion,
    verify_comparability,
    verify_denjoy,
    verify_finzi,
)
from circlelab.contfrac import GOLDEN
from circlelab.errors import BadParameters, DegenerateTriple, DepthTooShallow
from circlelab.maps import compose, iterate, pl_map, rotation, to_mpf
from circlelab.precision import arc_length, small_arc


def test_ratio_of_plain_triple():
    t = Triple(mpf(0), mpf("0.25"), mpf("0.75"))
    assert ratio(t) == mpf("0.5")


def test_degenerate_triple_rejected():
    with pytest.raises(DegenerateTriple):
        Triple(mpf(0), mpf(0), mpf("0.5"))


def test_rotation_distortion_is_one(rot):
    rng = random.Random(5)
    for _ in range(20):
        pts = sorted(mpf(rng.random()) for _ in range(3))
        try:
            t = Triple(*pts)
        except DegenerateTriple:
            continue
        assert abs(dr(rot, t) - 1) < mpf("1e-70")


def test_distortion_multiplicative_over_composition():
    f = pl_map([(0, F(1, 2)), (F(1, 2), F(3, 2))])
    g = pl_map([(0, F(2, 3)), (F(1, 4), F(10, 9)), (F(3, 4), F(10, 9))])
    gf = compose(g, f)
    rng = random.Random(7)
    checked = 0
    while checked < 100:
        pts = sorted(mpf(rng.random()) for _ in range(3))
        try:
            t = Triple(*pts)
        except DegenerateTriple:
            continue
        lhs = dr(gf, t)
        ft = Triple(f.evaluate(t.z1), f.evaluate(t.z2), f.evaluate(t.z3))
        rhs = dr(g, ft) * dr(f, t)
        assert abs(lhs - rhs) < mpf("1e-25")
        checked += 1


def test_distortion_invariant_under_rotation_conjugation(witness):
    t = Triple(mpf("0.11"), mpf("0.13"), mpf("0.18"))
    shift = rotation(F(1, 7))
    pre = Triple(*(shift.evaluate(p) for p in (t.z1, t.z2, t.z3)))
    direct = dr_power(witness, 5, t)
    from circlelab.maps import invert

    conj = compose(compose(shift, witness), invert(shift))
    moved = dr_power(conj, 5, pre)
    assert abs(direct - moved) < mpf("1e-60")


def test_finzi_rotation_exact(rot, gtable):
    report = verify_finzi(rot, gtable, 7, samples=40, seed=1)
    assert report["worst_log_ratio"] < mpf("1e-70")


def test_finzi_witness_within_variation(witness, gtable):
    report = verify_finzi(witness, gtable, 9, samples=120, seed=2)
    assert report["margin"] >= 0


def test_log_df_power_zero_steps(witness):
    assert log_df_power(witness, mpf("0.2"), 0) == 0


def test_denjoy_rotation_identity(rot, gtable):
    rows = verify_denjoy(rot, gtable, [3, 5], samples=30, seed=0)
    assert all(r["worst_abs_log"] < mpf("1e-70") for r in rows)


def test_comparability_envelope(witness, gtable):
    report = verify_comparability(witness, gtable, 7, samples=200, seed=4)
    assert report["margin"] >= 0


def test_primary_cell_rotation_marked_point(rot, gtable):
    cell = build_primary_cell(rot, gtable, mpf("0.25"), mpf("0.3"), 9, mpf("0.1"))
    assert cell.summed_length <= 2
    tri = cell.triple()
    assert arc_length(tri.z1, tri.z2) > 0


def test_primary_cell_too_shallow_names_first_property(witness, gtable):
    with pytest.raises(DepthTooShallow) as err:
        build_primary_cell(witness, gtable, mpf("0.25"), mpf(0), 1, mpf("0.01"))
    assert err.value.prop == "c-0"


def test_primary_cell_even_depth_rejected(witness, gtable):
    with pytest.raises(BadParameters):
        build_primary_cell(witness, gtable, mpf("0.25"), mpf(0), 8, mpf("0.1"))


def rotation_relative_position_oracle(alpha, y1_steps, c, d, q_prev, q_cur):
    """Closed-form t-series entry for a rigid rotation, from pure circle
    arithmetic: scan preimages d - k alpha for hits of [y1, y2]."""
    y2 = (c - y1_steps * alpha) % 1  # i_n(c) steps back from c
    y1 = (y2 - q_prev * alpha) % 1
    hits = []
    for k in range(q_cur + q_prev):
        pre = (d - k * alpha) % 1
        off = (pre - y1) % 1
        if off <= (y2 - y1) % 1:
            hits.append(k)
    folded = sorted({k % q_cur for k in hits})
    assert len(folded) == 1
    i_n = folded[0]
    pre = (d - i_n * alpha) % 1
    numer = (y2 - pre) % 1
    if i_n < q_prev:
        far = (y1 + q_cur * alpha) % 1
        denom = (y2 - far) % 1
    else:
        denom = (y2 - y1) % 1
    return i_n, numer / denom


def test_relative_position_matches_rotation_closed_form(rot, gtable):
    alpha = GOLDEN.to_mpf()
    x0, c, d = mpf("0.25"), mpf("0.3"), mpf("0.77")
    for n in (7, 9):
        cell = build_primary_cell(rot, gtable, x0, c, n, mpf("0.2"))
        entry = relative_position(rot, cell, d)
        i_oracle, t_oracle = rotation_relative_position_oracle(
            alpha, cell.index_of_c, c, d, cell.q_prev, cell.q_cur
        )
        assert entry.i_n == i_oracle
        assert abs(entry.t - t_oracle) < mpf("1e-50")
        assert 0 <= float(entry.t) <= 1


def test_classification_tags_on_synthetic_markers(rot, gtable):
    # markers hugging y2 from either side quantify as Q2; markers hugging
    # the far endpoint as Q3; a generic marker stays mid-range (Q1)
    x0, c = mpf("0.25"), mpf("0.3")
    window = [7, 9, 11]
    cells = {n: build_primary_cell(rot, gtable, x0, c, n, mpf("0.2")) for n in window}
    deep = cells[11]
    near = (deep.y2 + mpf("1e-12")) % 1
    far = (deep.y1 + mpf("1e-12")) % 1
    cls = classify_breaks(rot, gtable, x0, c, window, mpf("0.2"),
                          points=[near, far, mpf("0.77")])
    tags = {float(r.location): r.tag for r in cls.records}
    assert tags[float(near)] == "Q2"
    assert tags[float(far)] == "Q3"
    assert tags[float(mpf("0.77"))] in ("Q11", "Q12")
    assert cls.gamma0 > mpf("0.15")
    # Q2/Q3 members enter the E-set with the tag-matched return index
    for n in window:
        members = dict()
        for loc, k in cls.e_points(n):
            members[float(loc)] = k
        assert float(near) in members and float(far) in members
        rec_near = cls.record_at(near)
        assert members[float(near)] == rec_near.entries[n].i_n
        rec_far = cls.record_at(far)
        assert members[float(far)] == rec_far.entries[n].j_n
    # tail-smallness of the normalised distance for the E-members
    for rec, which in ((cls.record_at(near), "i"), (cls.record_at(far), "j")):
        n = window[-1]
        e = rec.entries[n]
        k = e.i_n if which == "i" else e.j_n
        pre = iterate(rot, -k, rec.location)
        dist = small_arc(pre, cells[n].y2) / cells[n].base_gap()
        assert dist < mpf("0.05")


def test_classification_oracle_map_frozen(oracle, gtable):
    cls = classify_breaks(oracle, gtable, mpf("0.25"), mpf(0), [9, 11, 13], mpf("0.12"))
    tags = sorted((round(float(r.location), 4), r.tag) for r in cls.records)
    assert tags == [(0.5, "Q11"), (0.588, "orbit-exact"), (0.7546, "Q11")]
    offsets = {round(float(r.location), 4): r.orbit_offset for r in cls.records}
    assert offsets[0.588] == -1
    assert mpf("0.25") < cls.gamma0 < mpf("0.35")


def test_secondary_cell_construction_and_ratio_bounds(oracle, gtable):
    cls = classify_breaks(oracle, gtable, mpf("0.25"), mpf(0), [9, 11], mpf("0.12"))
    cell = cls.cells[9]
    sec = build_secondary_cell(oracle, cell, cls.e_points(9), mpf("0.01"), mpf("0.04"),
                               cls.gamma0)
    gap = cell.base_gap()
    for z in (sec.z1, sec.z3):
        rel = small_arc(z, cell.y2) / gap
        assert mpf("0.01") <= rel <= mpf("0.04")
    with pytest.raises(BadParameters):
        build_secondary_cell(oracle, cell, cls.e_points(9), mpf("0.01"), cls.gamma0 * 2,
                             cls.gamma0)


def test_trace_identity_conjugacy_is_exactly_one(witness, gtable):
    class Identity:
        def evaluate(self, x):
            return to_mpf(x) % 1

    trace = trace_distortion(witness, gtable, witness, Identity(), mpf("0.25"), mpf(0),
                             [9, 11], mpf("0.12"), mpf("0.01"), mpf("0.04"))
    for row in trace.rows:
        assert row.ratio == 1


def test_trace_envelope_bounds(witness, gtable, rot):
    from circlelab.conjugacy import build_conjugacy

    table = build_conjugacy(witness, rot, mpf(0), mpf(0), 233)
    trace = trace_distortion(witness, gtable, rot, table, mpf("0.25"), mpf(0),
                             [9, 11], mpf("0.12"), mpf("0.01"), mpf("0.04"))
    v = witness.log_df_variation()
    for row in trace.rows:
        assert mp.e ** (-2 * v) * (1 - mpf("1e-6")) <= row.dr_f <= mp.e ** (2 * v) * (1 + mpf("1e-6"))
        assert row.dr_g == 1  # rigid rotation
