from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from cantorspeed.adic import ClopenSet, InvariantMeasure, OdometerSystem, format_clopen
from cantorspeed.report import PreconditionError
from cantorspeed.speedup import (
    Piece,
    PrefixHomeomorphism,
    SpeedupMap,
    close_residual,
    conjugacy_stage,
    construct_bijection,
    construct_injection,
    induction_step,
    inverse_injection,
    parse_map,
    power_speedup,
    subset_condition,
    transfer_partition,
    verify_speedup,
)

X2 = OdometerSystem((2,))
M2 = InvariantMeasure(X2)


@st.composite
def disjoint_pairs(draw, strict=True):
    """Disjoint nonempty (A, B) at a shared depth, μ(A) < μ(B) or equal."""
    bases = draw(st.sampled_from([(2,), (3,), (2, 3)]))
    system = OdometerSystem(bases)
    depth = draw(st.integers(2, 5 if bases == (2,) else 3))
    D = system.denominator(depth)
    codes = draw(st.permutations(range(D)))
    size_a = draw(st.integers(1, (D - 1) // 2))
    size_b = draw(st.integers(size_a + 1, D - size_a)) if strict else size_a
    a = ClopenSet.from_ints(system, depth, codes[:size_a])
    b = ClopenSet.from_ints(system, depth, codes[size_a : size_a + size_b])
    return InvariantMeasure(system), a, b


def brute(smap, a, image):
    n = max(smap.depth, a.canonical().depth, image.canonical().depth)
    table = oracles.map_table(smap, n)
    return n, table


# -- frozen examples


def test_subset_condition_takes_least_words():
    b1 = subset_condition(M2, X2.cylinder("000"), X2.cylinder("1"))
    assert format_clopen(b1) == "100"


def test_injection_single_step():
    smap = construct_injection(M2, X2.cylinder("000"), X2.cylinder("100") | X2.cylinder("110"))
    assert smap.lines() == ["000 -> jump 1"]
    assert [p.case for p in smap.pieces] == ["case1"]


def test_induction_step_dyadic_quarter():
    a, b = X2.cylinder("00"), X2.cylinder("11")
    a1, b1, partial = induction_step(M2, a, b, (0, 0), (1, 1), 2)
    assert M2(a1) == M2(b1) == Fraction(1, 16)
    assert M2(partial.domain()) == Fraction(3, 16)
    assert partial.domain() == a - a1
    assert verify_speedup(partial, a - a1, b - b1).ok


def test_power_map_line_format():
    assert power_speedup(M2, 5, 4).lines() == ["whole -> jump 5"]
    X3 = OdometerSystem((3,))
    with pytest.raises(PreconditionError, match="not minimal"):
        power_speedup(InvariantMeasure(X3), 3, 2)


def test_preconditions_name_the_hypothesis():
    with pytest.raises(PreconditionError, match="μ\\(A\\) ≥ μ\\(B\\)"):
        construct_injection(M2, X2.cylinder("0"), X2.cylinder("1"))
    with pytest.raises(PreconditionError, match="not disjoint"):
        construct_injection(M2, X2.cylinder("00"), X2.cylinder("0"))
    with pytest.raises(PreconditionError, match="μ\\(A\\) ≠ μ\\(B\\)"):
        construct_bijection(M2, X2.cylinder("00"), X2.cylinder("1"), 1)
    with pytest.raises(PreconditionError, match="μ\\(A\\) ≠ μ\\(B\\)"):
        transfer_partition(M2, [X2.cylinder("00")], X2.cylinder("1"))


def test_verify_catches_broken_maps():
    whole = X2.whole()
    collide = SpeedupMap(X2, (Piece(X2.cylinder("0"), 1), Piece(X2.cylinder("1"), 2)))
    rep = verify_speedup(collide, whole, whole)
    assert not rep["images_disjoint"].ok and not rep["brute_force"].ok
    still = SpeedupMap(X2, (Piece(whole, 0),))
    assert not verify_speedup(still, whole, whole)["jumps_positive"].ok
    short = SpeedupMap(X2, (Piece(X2.cylinder("0"), 1),))
    assert not verify_speedup(short, whole)["domain_exact"].ok


def test_parse_map_roundtrip():
    smap = parse_map(X2, "0 -> jump 1; 1 -> jump 3")
    assert parse_map(X2, "\n".join(smap.lines())).lines() == smap.lines()
    with pytest.raises(ValueError):
        parse_map(X2, "0 -> 1")


def test_prefix_homeomorphism_validation():
    swap = PrefixHomeomorphism.from_words(X2, X2, {"0": "1", "1": "0"})
    assert swap.image(X2.cylinder("01")) == X2.cylinder("11")
    assert swap.inverse_image(swap.image(X2.cylinder("011"))) == X2.cylinder("011")
    with pytest.raises(ValueError):
        PrefixHomeomorphism.from_words(X2, X2, {"0": "1", "1": "1"})
    X4 = OdometerSystem((4,))
    with pytest.raises(ValueError):
        PrefixHomeomorphism.from_words(X4, X2, {"0": "00", "1": "10", "2": "01", "3": "11"})


def test_conjugacy_stage_preconditions():
    ident = PrefixHomeomorphism.identity(X2)
    with pytest.raises(PreconditionError, match="A₀ ∩ T⁻¹A₀"):
        conjugacy_stage(M2, M2, ident, (), 2)
    with pytest.raises(PreconditionError, match="ν"):
        conjugacy_stage(M2, M2, ident, (0, 0, 0), 2)


def test_conjugacy_stage_with_digit_swap():
    swap = PrefixHomeomorphism.from_words(X2, X2, {"0": "1", "1": "0"})
    stage = conjugacy_stage(M2, M2, swap, (1, 1), 3)
    assert stage.check().ok, stage.check().lines()


def test_conjugacy_stage_trivial_case_frozen():
    stage = conjugacy_stage(M2, M2, PrefixHomeomorphism.identity(X2), (0,), 2)
    assert stage.speedup.lines() == ["00,01,10 -> jump 1"]
    assert stage.phi_lines() == [
        "col 0 level 0: 00 -> 00",
        "col 0 level 1: 10 -> 10",
        "col 0 level 2: 01 -> 01",
        "col 0 level 3: 11 -> 11",
    ]


def test_bijection_on_triadic():
    X3 = OdometerSystem((3,))
    m = InvariantMeasure(X3)
    a, b = X3.cylinder("0"), X3.cylinder("2")
    smap, ledger = construct_bijection(m, a, b, 2)
    assert ledger.check().ok
    dom, img = a - ledger.residual_a, b - ledger.residual_b
    assert verify_speedup(smap, dom, img).ok
    n, table = brute(smap, dom, img)
    assert set(table.values()) == oracles.words_of(img, n)


# -- properties


@given(disjoint_pairs())
def test_injection_is_injective_into_b(case):
    m, a, b = case
    smap = construct_injection(m, a, b)
    n, table = brute(smap, a, b)
    assert set(table) == oracles.words_of(a, n)
    assert len(set(table.values())) == len(table)
    assert set(table.values()) <= oracles.words_of(b, n)
    assert all(p.jump >= 1 for p in smap.pieces)
    for asg in smap.assignments:
        assert asg.is_valid()


@given(disjoint_pairs())
def test_inverse_injection_covers_u(case):
    m, u, target = case
    back = inverse_injection(m, u, target)
    assert back.image() == u
    assert back.domain().issubset(target)
    assert verify_speedup(back, back.domain(), u).ok


@given(disjoint_pairs(strict=False))
def test_close_residual_is_exact_bijection(case):
    m, a, b = case
    smap = close_residual(m, a, b)
    rep = verify_speedup(smap, a, b)
    assert rep.ok, rep.lines()


@settings(max_examples=25)
@given(disjoint_pairs(strict=False), st.integers(1, 2))
def test_bijection_ledger(case, stages):
    m, a, b = case
    smap, ledger = construct_bijection(m, a, b, stages)
    assert ledger.check().ok
    assert ledger.residual() < m(a) / 2**stages
    assert verify_speedup(smap, a - ledger.residual_a, b - ledger.residual_b).ok


@given(disjoint_pairs(), st.integers(1, 3), st.data())
def test_transfer_preserves_cells(case, k, data):
    m, a, b = case
    b_eq = subset_condition(m, a, b)
    codes = sorted(a.ints)
    cuts = sorted(data.draw(st.sets(st.integers(1, max(1, len(codes) - 1)), max_size=k)))
    cuts = [c for c in cuts if 0 < c < len(codes)]
    parts = [ClopenSet.from_ints(a.system, a.depth, codes[i:j]) for i, j in zip([0] + cuts, cuts + [len(codes)])]
    cells = transfer_partition(m, parts, b_eq)
    assert [oracles.mu_by_count(c, max(c.depth, 1)) for c in cells] == [oracles.mu(p) for p in parts]
    assert all(c.issubset(b_eq) for c in cells)


def test_power_map_on_triadic():
    X3 = OdometerSystem((3,))
    smap = power_speedup(InvariantMeasure(X3), 2, 6)
    assert smap.lines() == ["whole -> jump 2"]
    assert verify_speedup(smap, X3.whole(), X3.whole(), depth=6).ok
