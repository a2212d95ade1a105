import itertools
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from cantorspeed.adic import OdometerSystem
from cantorspeed.dimgroups import (
    GroupHom,
    OrderedGroup,
    check_axioms,
    first_isomorphism_check,
    gate,
    gate_both_ways,
    infinitesimals,
    is_positive_map,
    k0_of_odometer,
    matrix_rank,
    nullspace,
    positive_section,
    states,
    verify_gate_hom,
)
from cantorspeed.report import PreconditionError

P = OrderedGroup.parse
CONES = ["coordinatewise", "strict", "first-strict"]


def grid_positives(g, width=3):
    """Positive elements of g with small numerators and denominators 1, m, m^2."""
    coords = []
    for m in g.denoms:
        dens = [1] if m == 1 else [1, m, m * m]
        coords.append(sorted({Fraction(k, d) for k in range(-width, width + 1) for d in dens}))
    return [x for x in itertools.product(*coords) if g.is_positive(x)]


@st.composite
def groups(draw, max_rank=2):
    rank = draw(st.integers(1, max_rank))
    denoms = tuple(draw(st.sampled_from([1, 2, 3])) for _ in range(rank))
    return OrderedGroup(denoms, draw(st.sampled_from(CONES)), (1,) * rank)


# -- frozen values


@pytest.mark.parametrize(
    "spec,count,inf",
    [
        ("rank=1 denoms=2 cone=coordinatewise unit=1", 1, "{0}"),
        ("rank=2 denoms=2,2 cone=strict unit=1,1", 2, "{0}"),
        ("rank=2 denoms=1,1 cone=coordinatewise", 2, "{0}"),
        ("rank=2 denoms=2,1 cone=first-strict", 1, "{(0, a) : a ∈ Z}"),
    ],
)
def test_states_and_infinitesimals(spec, count, inf):
    g = P(spec)
    assert len(states(g)) == count
    assert infinitesimals(g).describe() == inf


def test_axiom_outcomes():
    failing = lambda s: [c.name for c in check_axioms(P(s)).checks if not c.ok]
    assert failing("rank=2 denoms=2,2 cone=strict") == []
    assert failing("rank=2 denoms=2,1 cone=first-strict") == []
    assert failing("rank=2 denoms=1,1 cone=coordinatewise") == ["simple"]
    # with integer coordinates the strict cones lose interpolation
    assert failing("rank=2 denoms=1,1 cone=strict") == ["riesz_interpolation"]
    assert failing("rank=2 denoms=1,1 cone=first-strict") == ["riesz_interpolation"]


def test_parse_rejects_bad_specs():
    for bad in ("denoms=2 cone=wavy", "rank=2 denoms=2", "cone=strict", "denoms=2 unit=1/3"):
        with pytest.raises(ValueError):
            P(bad)


def test_gate_examples():
    res = gate(P("rank=2 denoms=2,2 cone=coordinatewise"), P("rank=1 denoms=2"))
    assert res.found and res.hom.format_matrix() == "[1 0]"
    res = gate(P("rank=1 denoms=4"), P("rank=1 denoms=2"))
    assert res.found and res.hom.format_matrix() == "[1]"
    res = gate(P("rank=1 denoms=6"), P("rank=1 denoms=2"))
    assert res.status == "obstructed"
    assert res.obstructions[0].startswith("denominator:")
    res = gate(P("rank=1 denoms=2"), P("rank=2 denoms=2,2 cone=strict"))
    assert [o.split(":")[0] for o in res.obstructions] == ["state-count", "rank"]


def test_isomorphic_groups_both_ways():
    g = P("rank=2 denoms=2,3 cone=strict")
    both = gate_both_ways(g, g)
    assert both.isomorphic is True


def test_rank_limit():
    with pytest.raises(PreconditionError):
        states(P("rank=4 denoms=2,2,2,2"))


def test_odometer_group():
    g = k0_of_odometer(OdometerSystem((2, 3)))
    assert g.denoms == (6,) and g.cone == "coordinatewise"


def test_first_isomorphism_requires_onto():
    g2 = P("rank=2 denoms=2,2 cone=coordinatewise")
    g1 = P("rank=1 denoms=2")
    phi = GroupHom(g2, g1, ((Fraction(1, 2), Fraction(1, 2)),))
    assert phi.is_positive() and phi.preserves_unit()
    sigma = positive_section(phi)
    assert sigma is not None
    assert first_isomorphism_check(phi, g2, g1).ok


# -- properties


@given(groups(), groups(), st.data())
def test_positivity_closed_form_matches_grid(src, tgt, data):
    M = tuple(
        tuple(Fraction(data.draw(st.integers(-1, 2))) for _ in range(src.rank)) for _ in range(tgt.rank)
    )
    phi = GroupHom(src, tgt, M)
    closed = is_positive_map(src, tgt, M)
    grid_ok = all(tgt.is_positive(phi(x)) for x in grid_positives(src))
    assert closed == grid_ok


@given(groups(max_rank=3))
def test_states_are_positive_and_normalized(g):
    pos = grid_positives(g, 2) if g.rank < 3 else []
    for p in states(g):
        assert p(g.unit) == 1
        assert all(p(x) >= 0 for x in pos)
    inf = infinitesimals(g)
    for x in pos:
        if inf.contains(x):
            assert all(p(x) == 0 for p in states(g))


@given(groups(), groups())
def test_found_gates_verify(src, tgt):
    res = gate(src, tgt, bound=4, exp=2, max_matrices=2000)
    assert res.status in ("found", "obstructed", "bounded-search-exhausted")
    if res.found:
        assert verify_gate_hom(res.hom).ok
        sigma = res.section
        assert sigma is not None
        for e in tgt.basis():
            assert res.hom(sigma(e)) == e
    elif res.status == "obstructed":
        assert res.obstructions


@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=1, max_size=3))
def test_nullspace_and_rank(rows):
    M = [[Fraction(x) for x in r] for r in rows]
    ker = nullspace(M)
    assert matrix_rank(M) + len(ker) == 3
    for v in ker:
        assert all(sum(a * b for a, b in zip(r, v)) == 0 for r in M)
