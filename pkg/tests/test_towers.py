import pytest
from hypothesis import given, strategies as st

import oracles
from cantorspeed.adic import ClopenSet, InvariantMeasure, OdometerSystem, format_clopen
from cantorspeed.report import PreconditionError
from cantorspeed.towers import (
    itinerary_classes,
    nested_towers,
    refine_tower,
    return_times,
    tall_tower,
    tower_over_base,
)

X2 = OdometerSystem((2,))
M2 = InvariantMeasure(X2)


@st.composite
def nonempty_clopens(draw, max_depth=6):
    bases = draw(st.sampled_from([(2,), (3,), (2, 3)]))
    system = OdometerSystem(bases)
    depth = draw(st.integers(1, max_depth if bases == (2,) else 3))
    D = system.denominator(depth)
    ints = draw(st.sets(st.integers(0, D - 1), min_size=1, max_size=min(D, 12)))
    return ClopenSet.from_ints(system, depth, ints)


def test_tower_over_cylinder_frozen():
    t = tower_over_base(M2, X2.cylinder("00"))
    assert t.summary() == "1 column, height 4"
    assert t.report_lines() == ["base=00 height=4"]
    X3 = OdometerSystem((3,))
    assert tower_over_base(InvariantMeasure(X3), X3.cylinder("0")).summary() == "1 column, height 3"


def test_return_times_of_two_cylinders():
    # 00 -> 10 in one step; 10 -> 01 -> 11 -> 00 in three
    prof = return_times(M2, X2.cylinder("00") | X2.cylinder("10"))
    assert {format_clopen(p): t for p, t in prof.pieces} == {"00": 1, "10": 3}
    assert prof.check().ok


def test_refine_tower_by_depth_two_cells():
    t = tower_over_base(M2, X2.cylinder("0"))
    q = [X2.cylinder("00") | X2.cylinder("11"), X2.cylinder("01") | X2.cylinder("10")]
    r = refine_tower(t, q)
    assert r.bases == X2.cylinder("0")
    assert {c.base for c in r.columns} == {X2.cylinder("00"), X2.cylinder("01")}
    assert r.check().ok and r.refines(t)


def test_tall_tower_heights():
    assert tall_tower(M2, 1).heights == [2]
    assert tall_tower(M2, 4).heights == [8]
    with pytest.raises(ValueError):
        tall_tower(M2, 0)


def test_nested_towers_shrink_to_target():
    towers = nested_towers(M2, (1,), 2)
    assert [t.bases for t in towers] == [X2.cylinder("1"), X2.cylinder("10")]
    assert towers[1].refines(towers[0])


def test_bad_inputs():
    with pytest.raises(PreconditionError):
        tower_over_base(M2, X2.empty())
    t = tower_over_base(M2, X2.cylinder("0"))
    with pytest.raises(PreconditionError):
        itinerary_classes(t, [X2.cylinder("0"), X2.cylinder("00")])
    with pytest.raises(PreconditionError):
        itinerary_classes(t, [X2.cylinder("0")])


@given(nonempty_clopens())
def test_return_times_are_first_returns(a):
    bases = a.system.bases
    n = a.canonical().depth
    target = oracles.words_of(a, n)
    prof = return_times(InvariantMeasure(a.system), a)
    for w in target:
        assert prof.time_of(w) == oracles.first_return(bases, target, w)


@given(nonempty_clopens())
def test_tower_partition_invariants(base):
    m = InvariantMeasure(base.system)
    t = tower_over_base(m, base)
    rep = t.check()
    assert rep.ok, rep.lines()
    assert t.mass(m) == 1
    assert t.bases == base


@given(nonempty_clopens(max_depth=5), st.data())
def test_refined_levels_sit_in_single_cells(base, data):
    system = base.system
    m = InvariantMeasure(system)
    t = tower_over_base(m, base)
    d = data.draw(st.integers(1, 3))
    D = system.denominator(d)
    cut = data.draw(st.sets(st.integers(0, D - 1)))
    q1 = ClopenSet.from_ints(system, d, cut)
    q = [q1, ~q1]
    r = refine_tower(t, q)
    assert r.check().ok and r.refines(t) and r.mass(m) == 1
    for lv in r.all_levels():
        assert sum(not lv.isdisjoint(c) for c in q) == 1


def test_return_time_frozen_values():
    assert return_times(M2, X2.cylinder("0")).times == [2]
    assert return_times(M2, X2.whole()).times == [1]
    assert [t.heights for t in nested_towers(M2, (0,), 2)] == [[2], [4]]
    assert len(nested_towers(M2, (0,), 1)) == 1
