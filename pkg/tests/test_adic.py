from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

import oracles
from cantorspeed.adic import (
    ClopenSet,
    InvariantMeasure,
    OdometerSystem,
    Point,
    add_to_word,
    apply_T,
    clopen_value_set,
    format_clopen,
    is_minimal_power,
    parse_clopen,
    parse_rational,
    format_rational,
    refine,
    reflect,
    small_clopen,
    successor_word,
)

SYSTEMS = [(2,), (3,), (2, 3), (3, 2, 2)]


@st.composite
def clopens(draw, bases=None, max_depth=5):
    bases = bases or draw(st.sampled_from(SYSTEMS))
    system = OdometerSystem(bases)
    depth = draw(st.integers(0, max_depth if len(bases) == 1 and bases[0] == 2 else 3))
    D = system.denominator(depth)
    ints = draw(st.sets(st.integers(0, D - 1), max_size=D))
    return ClopenSet.from_ints(system, depth, ints)


@st.composite
def clopen_pairs(draw):
    bases = draw(st.sampled_from(SYSTEMS))
    return draw(clopens(bases)), draw(clopens(bases))


# -- frozen values


def test_shift_on_cylinders():
    X = OdometerSystem((2,))
    assert apply_T(X.cylinder("00")) == X.cylinder("10")
    assert apply_T(X.cylinder("11")) == X.cylinder("00")
    assert apply_T(X.cylinder("10"), -1) == X.cylinder("00")


def test_system_normalizes_to_minimal_period():
    assert OdometerSystem((2, 2)).bases == (2,)
    assert OdometerSystem((2, 3, 2, 3)).bases == (2, 3)
    with pytest.raises(ValueError):
        OdometerSystem((1,))
    with pytest.raises(ValueError):
        OdometerSystem(())


def test_denominators():
    X = OdometerSystem((2, 3))
    assert [X.denominator(n) for n in range(5)] == [1, 2, 6, 12, 36]


def test_small_clopen():
    m = InvariantMeasure(OdometerSystem((2,)))
    assert small_clopen(m, Fraction(1, 5)) == m.system.cylinder("000")
    assert small_clopen(m, Fraction(1)) == m.system.cylinder("0")
    for bad in (Fraction(0), Fraction(-1), Fraction(3, 2)):
        with pytest.raises(ValueError):
            small_clopen(m, bad)


def test_clopen_values_dyadic():
    X = OdometerSystem((2,))
    assert clopen_value_set(X, 2) == {Fraction(k, 4) for k in range(5)}


def test_minimal_powers_match_gcd():
    for bases in SYSTEMS:
        X = OdometerSystem(bases)
        for k in range(1, 13):
            assert is_minimal_power(X, k, 4) == all(oracles.single_cycle(bases, k, n) for n in range(1, 5))


def test_parse_and_format():
    X = OdometerSystem((2,))
    assert format_clopen(parse_clopen(X, "00,01")) == "0"
    assert format_clopen(parse_clopen(X, "0,1")) == "whole"
    assert format_clopen(parse_clopen(X, "empty")) == "empty"
    assert parse_clopen(X, "1,011") == X.cylinder("1") | X.cylinder("011")
    with pytest.raises(ValueError):
        parse_clopen(X, "")
    with pytest.raises(ValueError):
        parse_clopen(X, "012")
    assert parse_rational(format_rational(Fraction(3, 8))) == Fraction(3, 8)


def test_point_prefix_with_shift():
    X = OdometerSystem((2,))
    p = Point(X, (1, 1))
    assert p.prefix(3) == (1, 1, 0)
    assert p.shifted(1).prefix(3) == (0, 0, 1)
    assert p.shifted(-4).prefix(3) == (1, 1, 1)
    assert p in X.cylinder("11")


# -- properties


@given(clopens())
def test_measure_matches_count(s):
    m = InvariantMeasure(s.system)
    assert m(s) == oracles.mu(s)
    assert m(s.canonical()) == m(s)


@given(clopens(), st.integers(0, 3))
def test_refine_is_same_set(s, extra):
    r = refine(s, s.depth + extra)
    assert r == s
    assert set(r.words) == oracles.words_of(s, s.depth + extra)


@given(clopens())
def test_canonical_is_minimal(s):
    c = s.canonical()
    assert c == s
    assert c.depth <= s.depth
    if c.depth > 0 and not c.is_empty():
        # no full sibling family survives
        parents = {w[:-1] for w in c.words}
        b = s.system.base(c.depth - 1)
        assert any(sum(1 for w in c.words if w[:-1] == p) < b for p in parents)


@given(clopen_pairs())
def test_boolean_algebra_matches_sets(pair):
    a, b = pair
    n = max(a.depth, b.depth)
    wa, wb = oracles.words_of(a, n), oracles.words_of(b, n)
    everything = oracles.expand(a.system.bases, [()], n)
    assert oracles.words_of(a | b, n) == wa | wb
    assert oracles.words_of(a & b, n) == wa & wb
    assert oracles.words_of(a - b, n) == wa - wb
    assert oracles.words_of(~a, n) == everything - wa
    assert (a & b).issubset(a)
    assert a.isdisjoint(b) == (not wa & wb)


@given(clopens(), st.integers(-7, 7))
def test_shift_matches_digit_addition(s, k):
    img = apply_T(s, k)
    bases = s.system.bases
    assert set(refine(img, s.depth).words) == {oracles.translate(bases, w, k) for w in s.words}
    m = InvariantMeasure(s.system)
    assert m(img) == m(s)


@given(st.sampled_from(SYSTEMS), st.integers(1, 5), st.data())
def test_successor_oracles_agree(bases, n, data):
    X = OdometerSystem(bases)
    k = data.draw(st.integers(0, X.denominator(n) - 1))
    w = X.int_to_word(k, n)
    assert X.word_to_int(w) == k == oracles.code(bases, w)
    assert successor_word(X, w) == oracles.add_one(bases, w)
    j = data.draw(st.integers(0, 50))
    assert add_to_word(X, w, j) == oracles.translate(bases, w, j)


@given(clopens())
def test_reflection_reverses_time(s):
    assert reflect(reflect(s)) == s
    assert reflect(apply_T(reflect(s))) == apply_T(s, -1)


@given(clopens())
def test_format_roundtrip(s):
    assert parse_clopen(s.system, format_clopen(s)) == s
