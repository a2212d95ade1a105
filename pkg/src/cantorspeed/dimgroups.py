"""Unital ordered groups ``Z[1/m_1] + ... + Z[1/m_d]`` with three cones.

Cones:

``coordinatewise``
    every coordinate ``>= 0``
``strict``
    every coordinate ``> 0``, or the zero vector
``first-strict``
    first coordinate ``> 0``, or the zero vector

``m_i = 1`` gives an integer coordinate.  For these groups states,
infinitesimals and positivity of a homomorphism all have closed forms; the
closed forms are used for certificates and random samples are used as an
independent cross-check.
"""

from __future__ import annotations

import itertools
import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .adic import OdometerSystem, format_rational
from .report import PreconditionError, Report

CONES = ("coordinatewise", "strict", "first-strict")
_CONE_ALIASES = {
    "coordinatewise": "coordinatewise",
    "coordinatewise-nonnegative": "coordinatewise",
    "nonnegative": "coordinatewise",
    "strict": "strict",
    "strict-positive-or-zero": "strict",
    "first-strict": "first-strict",
    "first-coordinate-strict": "first-strict",
}

Vector = tuple[Fraction, ...]
Matrix = tuple[tuple[Fraction, ...], ...]


def prime_factors(n: int) -> frozenset[int]:
    out = set()
    p = 2
    while p * p <= n:
        while n % p == 0:
            out.add(p)
            n //= p
        p += 1
    if n > 1:
        out.add(n)
    return frozenset(out)


def in_localization(q: Fraction, m: int) -> bool:
    """``q`` lies in ``Z[1/m]``."""
    d = Fraction(q).denominator
    for p in prime_factors(m):
        while d % p == 0:
            d //= p
    return d == 1


def _fmt_vec(v: Iterable[Fraction]) -> str:
    return "(" + ", ".join(_fmt_num(x) for x in v) + ")"


def _fmt_num(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else format_rational(x)


def _ring_name(m: int) -> str:
    return "Z" if m == 1 else f"Z[1/{m}]"


@dataclass(frozen=True)
class OrderedGroup:
    denoms: tuple[int, ...]
    cone: str
    unit: Vector

    def __post_init__(self) -> None:
        denoms = tuple(int(m) for m in self.denoms)
        if not denoms:
            raise ValueError("rank must be at least 1")
        if any(m < 1 for m in denoms):
            raise ValueError("denominator bases must be >= 1")
        cone = _CONE_ALIASES.get(self.cone)
        if cone is None:
            raise ValueError(f"unknown cone {self.cone!r}; expected one of {', '.join(CONES)}")
        unit = tuple(Fraction(u) for u in self.unit)
        if len(unit) != len(denoms):
            raise ValueError("unit has the wrong number of coordinates")
        object.__setattr__(self, "denoms", denoms)
        object.__setattr__(self, "cone", cone)
        object.__setattr__(self, "unit", unit)
        if not self.contains(unit):
            raise ValueError(f"unit {_fmt_vec(unit)} is not in the group")

    @property
    def rank(self) -> int:
        return len(self.denoms)

    @classmethod
    def parse(cls, text: str) -> OrderedGroup:
        """Parse ``"rank=2 denoms=2,2 cone=strict unit=1,1"``."""
        fields = dict(re.findall(r"(\w+)\s*=\s*(\S+)", text))
        try:
            denoms = tuple(int(t) for t in fields["denoms"].split(","))
            cone = fields.get("cone", "coordinatewise")
            unit = tuple(Fraction(t) for t in fields["unit"].split(",")) if "unit" in fields else (Fraction(1),) * len(denoms)
        except (KeyError, ValueError) as exc:
            raise ValueError(f"bad group spec {text!r}: {exc}") from None
        if "rank" in fields and int(fields["rank"]) != len(denoms):
            raise ValueError(f"rank={fields['rank']} but {len(denoms)} denominators given")
        return cls(denoms, cone, unit)

    def spec(self) -> str:
        return (
            f"rank={self.rank} denoms={','.join(map(str, self.denoms))} cone={self.cone} "
            f"unit={','.join(_fmt_num(u) for u in self.unit)}"
        )

    def __str__(self) -> str:
        ring = " + ".join(_ring_name(m) for m in self.denoms)
        return f"({ring}, {self.cone}, u={_fmt_vec(self.unit)})"

    def element(self, *coords: Any) -> Vector:
        v = tuple(Fraction(c) for c in coords)
        if not self.contains(v):
            raise ValueError(f"{_fmt_vec(v)} is not in {self}")
        return v

    def contains(self, x: Sequence[Fraction]) -> bool:
        return len(x) == self.rank and all(in_localization(Fraction(c), m) for c, m in zip(x, self.denoms))

    def is_positive(self, x: Sequence[Fraction]) -> bool:
        if all(c == 0 for c in x):
            return True
        if self.cone == "coordinatewise":
            return all(c >= 0 for c in x)
        if self.cone == "strict":
            return all(c > 0 for c in x)
        return x[0] > 0

    def leq(self, a: Sequence[Fraction], b: Sequence[Fraction]) -> bool:
        return self.is_positive(tuple(y - x for x, y in zip(a, b)))

    def zero(self) -> Vector:
        return (Fraction(0),) * self.rank

    def basis(self) -> list[Vector]:
        return [tuple(Fraction(int(i == j)) for j in range(self.rank)) for i in range(self.rank)]

    # -- sampling
    def _coord(self, rng: random.Random, i: int, lo: int = -6, hi: int = 6) -> Fraction:
        m = self.denoms[i]
        den = m ** rng.randint(0, 3) if m > 1 else 1
        return Fraction(rng.randint(lo, hi), den)

    def sample(self, rng: random.Random) -> Vector:
        return tuple(self._coord(rng, i) for i in range(self.rank))

    def sample_positive(self, rng: random.Random, nonzero: bool = True) -> Vector:
        while True:
            if self.cone == "coordinatewise":
                v = tuple(self._coord(rng, i, 0, 6) for i in range(self.rank))
            elif self.cone == "strict":
                v = tuple(self._coord(rng, i, 1, 6) for i in range(self.rank))
            else:
                v = (self._coord(rng, 0, 1, 6),) + tuple(self._coord(rng, i) for i in range(1, self.rank))
            if not nonzero or any(v):
                return v


def _add(a: Vector, b: Vector) -> Vector:
    return tuple(x + y for x, y in zip(a, b))


def _sub(a: Vector, b: Vector) -> Vector:
    return tuple(x - y for x, y in zip(a, b))


def _scale(n: Fraction | int, a: Vector) -> Vector:
    return tuple(n * x for x in a)


def dominating_multiple(g: OrderedGroup, v: Vector, x: Vector) -> int | None:
    """Least ``n >= 1`` with ``x <= n v``, or ``None`` if there is none.

    Candidate ``n`` comes from the cone's closed form and is then confirmed
    with :meth:`OrderedGroup.is_positive`.
    """
    if not g.is_positive(v) or not any(v):
        return None
    bound = 1
    for vk, xk in zip(v, x):
        if vk > 0:
            bound = max(bound, math.floor(xk / vk) + 1)
    for n in range(1, bound + 1):
        if g.leq(x, _scale(n, v)):
            return n
    return None


def is_order_unit(g: OrderedGroup, v: Vector, probes: Iterable[Vector]) -> tuple[bool, Vector | None]:
    for x in probes:
        if dominating_multiple(g, v, x) is None:
            return False, x
    return True, None


def _order_unit_probes(g: OrderedGroup, rng: random.Random, count: int) -> list[Vector]:
    """Samples plus the vectors that defeat non-units for these cones."""
    probes = [g.sample(rng) for _ in range(count)]
    for b in g.basis():
        probes.append(b)
        probes.append(_scale(-1, b))
    return probes


def _between(lo: Fraction, hi: Fraction, m: int) -> list[Fraction]:
    """A few elements of ``Z[1/m]`` in ``[lo, hi]``, including one strictly
    inside when the interval has one."""
    out = {lo, hi}
    if lo < hi:
        if m > 1:
            e = 0
            while Fraction(1, m**e) >= hi - lo:
                e += 1
            out.add(Fraction(math.floor(lo * m**e) + 1, m**e))
        else:
            out.add(Fraction(math.floor(lo) + 1))
    return [c for c in out if in_localization(c, m) and lo <= c <= hi]


def find_interpolant(g: OrderedGroup, a1: Vector, a2: Vector, b1: Vector, b2: Vector) -> Vector | None:
    """Explicit ``c`` with ``a_i <= c <= b_j``, or ``None`` if none exists
    among the candidates (the four inputs and coordinatewise choices at or
    strictly between the bounds)."""

    def ok(c: Vector) -> bool:
        return all(g.leq(a, c) for a in (a1, a2)) and all(g.leq(c, b) for b in (b1, b2))

    for c in (a1, a2, b1, b2):
        if ok(c):
            return c
    options = []
    for k in range(g.rank):
        lo, hi = max(a1[k], a2[k]), min(b1[k], b2[k])
        vals = _between(lo, hi, g.denoms[k]) if lo <= hi else []
        vals += [a1[k], a2[k], b1[k], b2[k], Fraction(0)]
        options.append(sorted(set(vals)))
    for c in itertools.product(*options):
        if g.contains(c) and ok(c):
            return tuple(c)
    return None


def _riesz_samples(g: OrderedGroup, rng: random.Random, budget: int) -> Iterable[tuple[Vector, ...]]:
    for _ in range(budget):
        a1, a2 = g.sample(rng), g.sample(rng)
        if rng.random() < 0.3 and g.leq(a1, a2):
            b1 = a2
        else:
            top = tuple(max(x, y) for x, y in zip(a1, a2))
            b1 = _add(top, g.sample_positive(rng))
        b2 = _add(tuple(max(x, y) for x, y in zip(a1, a2)), g.sample_positive(rng))
        if all(g.leq(a, b) for a in (a1, a2) for b in (b1, b2)):
            yield a1, a2, b1, b2
    # a small exhaustive grid catches discrete failures
    if g.rank <= 2:
        grid = list(itertools.product(*([Fraction(v) for v in (0, 1, 2)] for _ in range(g.rank))))
        for a1, a2, b1, b2 in itertools.product(grid, repeat=4):
            if all(g.leq(a, b) for a in (a1, a2) for b in (b1, b2)):
                yield a1, a2, b1, b2


def check_axioms(g: OrderedGroup, sample_budget: int = 200, seed: int = 0) -> Report:
    """Sampled verification of the dimension-group axioms plus simplicity."""
    if sample_budget < 1:
        raise ValueError("sample_budget must be >= 1")
    rng = random.Random(seed)
    rep = Report(f"axioms of {g}")

    closed = True
    for _ in range(sample_budget):
        x, y = g.sample_positive(rng), g.sample_positive(rng)
        if not g.is_positive(_add(x, y)):
            closed = False
            rep.add("cone_closed_under_addition", False, f"{_fmt_vec(x)} + {_fmt_vec(y)}")
            break
    if closed:
        rep.add("cone_closed_under_addition", True, f"{sample_budget} sums")

    pointed = all(
        not (g.is_positive(x) and g.is_positive(_scale(-1, x)))
        for x in (g.sample(rng) for _ in range(sample_budget))
        if any(x)
    ) and all(not g.is_positive(_scale(-1, b)) for b in g.basis() if g.is_positive(b))
    rep.add("cone_pointed", pointed, "G+ ∩ -G+ = {0} on samples")

    probes = _order_unit_probes(g, rng, sample_budget)
    unit_ok, bad = is_order_unit(g, g.unit, probes)
    rep.add(
        "unit_is_order_unit",
        unit_ok and g.is_positive(g.unit) and any(g.unit),
        "" if unit_ok else f"no n with {_fmt_vec(bad)} <= n·u",
    )
    # x = (x + n·u) - n·u with both terms positive
    directed = all(dominating_multiple(g, g.unit, _scale(-1, x)) is not None for x in probes)
    rep.add("directed", directed, "x = (x + n·u) - n·u")

    perforated = None
    for _ in range(sample_budget):
        a = g.sample(rng)
        n = rng.randint(2, 5)
        if g.is_positive(_scale(n, a)) and not g.is_positive(a):
            perforated = (a, n)
            break
    rep.add("unperforated", perforated is None, "" if perforated is None else f"{perforated[1]}·{_fmt_vec(perforated[0])}")

    riesz_fail = None
    count = 0
    for a1, a2, b1, b2 in _riesz_samples(g, rng, sample_budget):
        count += 1
        if find_interpolant(g, a1, a2, b1, b2) is None:
            riesz_fail = (a1, a2, b1, b2)
            break
    rep.add(
        "riesz_interpolation",
        riesz_fail is None,
        f"{count} quadruples interpolated" if riesz_fail is None else "no c between a1={} a2={} and b1={} b2={}".format(*map(_fmt_vec, riesz_fail)),
    )

    not_unit = None
    candidates = [g.sample_positive(rng) for _ in range(sample_budget)] + [b for b in g.basis() if g.is_positive(b)]
    for v in candidates:
        ok, bad = is_order_unit(g, v, probes)
        if not ok:
            not_unit = (v, bad)
            break
    rep.add(
        "simple",
        not_unit is None,
        "every sampled nonzero positive is an order unit"
        if not_unit is None
        else f"{_fmt_vec(not_unit[0])} is positive but never dominates {_fmt_vec(not_unit[1])}",
    )
    return rep


# ---------------------------------------------------------------- states


@dataclass(frozen=True)
class GroupState:
    coeffs: Vector

    def __call__(self, x: Sequence[Fraction]) -> Fraction:
        return sum((c * xi for c, xi in zip(self.coeffs, x)), Fraction(0))

    def __str__(self) -> str:
        terms = [f"{_fmt_num(c)}·x{i + 1}" if c != 1 else f"x{i + 1}" for i, c in enumerate(self.coeffs) if c]
        return " + ".join(terms) or "0"


def _require_supported(g: OrderedGroup) -> None:
    if g.rank > 3:
        raise PreconditionError(f"rank {g.rank} > 3 is outside the supported class")


def states(g: OrderedGroup) -> list[GroupState]:
    """Extreme states: normalized coordinate projections (only the first one
    for the first-strict cone, since positivity forces the others to vanish)."""
    _require_supported(g)
    coords = range(g.rank) if g.cone in ("coordinatewise", "strict") else [0]
    out = []
    for i in coords:
        if g.unit[i] <= 0:
            raise PreconditionError(f"unit coordinate {i + 1} is not positive; the unit is not an order unit")
        out.append(GroupState(tuple(Fraction(int(j == i)) / g.unit[i] for j in range(g.rank))))
    return out


def check_states(g: OrderedGroup, samples: int = 500, seed: int = 0) -> Report:
    rng = random.Random(seed)
    rep = Report("states")
    sts = states(g)
    rep.add("normalized", all(p(g.unit) == 1 for p in sts))
    pos = [g.sample_positive(rng) for _ in range(samples)]
    rep.add("positive", all(p(x) >= 0 for p in sts for x in pos), f"{samples} sampled positives")
    if g.cone == "strict":
        rep.add("strictly_positive", all(p(x) > 0 for p in sts for x in pos))
    return rep


@dataclass(frozen=True)
class Infinitesimals:
    group: OrderedGroup
    killed: tuple[int, ...]

    def contains(self, x: Sequence[Fraction]) -> bool:
        return self.group.contains(x) and all(x[i] == 0 for i in self.killed)

    def is_trivial(self) -> bool:
        return len(self.killed) == self.group.rank

    def describe(self) -> str:
        g = self.group
        if self.is_trivial():
            return "{0}"
        entries = []
        free = []
        for i in range(g.rank):
            if i in self.killed:
                entries.append("0")
            else:
                name = "abc"[len(free)]
                entries.append(name)
                free.append(f"{name} ∈ {_ring_name(g.denoms[i])}")
        return "{(" + ", ".join(entries) + ") : " + ", ".join(free) + "}"

    def __str__(self) -> str:
        return self.describe()


def infinitesimals(g: OrderedGroup) -> Infinitesimals:
    """Common kernel of the extreme states."""
    killed = sorted({i for p in states(g) for i, c in enumerate(p.coeffs) if c})
    return Infinitesimals(g, tuple(killed))


# ---------------------------------------------------------------- homomorphisms


def _mat_vec(M: Matrix, x: Sequence[Fraction]) -> Vector:
    return tuple(sum((a * b for a, b in zip(row, x)), Fraction(0)) for row in M)


def _mat_mul(A: Matrix, B: Matrix) -> Matrix:
    cols = list(zip(*B))
    return tuple(tuple(sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in cols) for row in A)


def rref(M: Sequence[Sequence[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over the rationals and the pivot columns."""
    A = [[Fraction(x) for x in row] for row in M]
    rows, cols = len(A), len(A[0]) if A else 0
    pivots = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        lead = A[r][c]
        A[r] = [x / lead for x in A[r]]
        for i in range(rows):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [x - f * y for x, y in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return A, pivots


def matrix_rank(M: Sequence[Sequence[Fraction]]) -> int:
    return len(rref(M)[1]) if M and M[0] else 0


def nullspace(M: Sequence[Sequence[Fraction]]) -> list[Vector]:
    A, pivots = rref(M)
    cols = len(M[0])
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * cols
        v[f] = Fraction(1)
        for r, p in enumerate(pivots):
            v[p] = -A[r][f]
        basis.append(tuple(v))
    return basis


def _solve(M: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Vector | None:
    """One rational solution of ``M x = b`` (free variables zero)."""
    aug = [list(row) + [Fraction(bi)] for row, bi in zip(M, b)]
    A, pivots = rref(aug)
    cols = len(M[0])
    if cols in pivots:
        return None
    x = [Fraction(0)] * cols
    for r, p in enumerate(pivots):
        x[p] = A[r][cols]
    return tuple(x)


def entry_allowed(q: Fraction, m_src: int, m_tgt: int) -> bool:
    """``q · Z[1/m_src] ⊆ Z[1/m_tgt]``."""
    if q == 0:
        return True
    return in_localization(q, m_tgt) and prime_factors(m_src) <= prime_factors(m_tgt)


def is_positive_map(source: OrderedGroup, target: OrderedGroup, M: Matrix) -> bool:
    """Closed-form test of ``M(source+) ⊆ target+``."""
    zero = all(x == 0 for row in M for x in row)
    if zero:
        return True
    cols = list(zip(*M))
    if source.cone == "coordinatewise":
        return all(target.is_positive(c) for c in cols)
    if source.cone == "strict":
        if target.cone == "coordinatewise":
            return all(x >= 0 for row in M for x in row)
        if target.cone == "strict":
            return all(all(x >= 0 for x in row) and any(row) for row in M)
        return all(x >= 0 for x in M[0]) and any(M[0])
    # first-strict source: M = [c | N]
    c = cols[0]
    rest = [row[1:] for row in M]
    if target.cone == "coordinatewise":
        return all(x == 0 for r in rest for x in r) and all(x >= 0 for x in c)
    if target.cone == "strict":
        return all(x == 0 for r in rest for x in r) and all(x > 0 for x in c)
    return all(x == 0 for x in rest[0]) and c[0] > 0


@dataclass(frozen=True)
class GroupHom:
    """``φ(x) = M x`` from ``source`` to ``target``; ``M`` has one row per
    target coordinate."""

    source: OrderedGroup
    target: OrderedGroup
    matrix: Matrix

    def __post_init__(self) -> None:
        M = tuple(tuple(Fraction(x) for x in row) for row in self.matrix)
        if len(M) != self.target.rank or any(len(r) != self.source.rank for r in M):
            raise ValueError("matrix shape does not match the groups")
        object.__setattr__(self, "matrix", M)

    def __call__(self, x: Sequence[Fraction]) -> Vector:
        return _mat_vec(self.matrix, x)

    def compose(self, other: GroupHom) -> GroupHom:
        """``self ∘ other``."""
        if other.target != self.source:
            raise ValueError("homomorphisms do not compose")
        return GroupHom(other.source, self.target, _mat_mul(self.matrix, other.matrix))

    def denominator_certificate(self) -> list[str]:
        """One line per nonzero entry explaining why it maps the source
        coordinate ring into the target coordinate ring."""
        lines = []
        for i, row in enumerate(self.matrix):
            for j, q in enumerate(row):
                if q == 0:
                    continue
                ms, mt = self.source.denoms[j], self.target.denoms[i]
                ok = entry_allowed(q, ms, mt)
                lines.append(
                    f"M[{i + 1}][{j + 1}] = {_fmt_num(q)}: {_fmt_num(q)}·{_ring_name(ms)} "
                    f"{'⊆' if ok else '⊄'} {_ring_name(mt)}"
                )
        return lines

    def is_well_defined(self) -> bool:
        return all(
            entry_allowed(q, self.source.denoms[j], self.target.denoms[i])
            for i, row in enumerate(self.matrix)
            for j, q in enumerate(row)
        )

    def preserves_unit(self) -> bool:
        return self(self.source.unit) == self.target.unit

    def is_positive(self) -> bool:
        return is_positive_map(self.source, self.target, self.matrix)

    def kernel_basis(self) -> list[Vector]:
        return nullspace(self.matrix)

    def format_matrix(self) -> str:
        return "[" + "; ".join(" ".join(_fmt_num(x) for x in row) for row in self.matrix) + "]"

    def is_projection(self, i: int) -> bool:
        return self.target.rank == 1 and all(x == (1 if k == i else 0) for k, x in enumerate(self.matrix[0]))


def _value_pool(m_tgt: int, bound: int, exp: int) -> list[Fraction]:
    dens = sorted({m_tgt**e for e in range(exp + 1)}) if m_tgt > 1 else [1]
    vals = {Fraction(n, d) for d in dens for n in range(-bound, bound + 1)}
    return sorted(vals, key=lambda q: (abs(q.numerator) + q.denominator, q < 0, abs(q)))


def positive_section(phi: GroupHom, bound: int = 8, exp: int = 4) -> GroupHom | None:
    """A positive, well-defined ``σ: target -> source`` with ``φ∘σ = id``.

    Its existence certifies that ``φ`` is onto and that ``φ(source+)``
    exhausts ``target+``.
    """
    M = phi.matrix
    d1, d2 = phi.target.rank, phi.source.rank
    if matrix_rank(M) < d1:
        return None
    null = nullspace(M)
    particular = []
    for i in range(d1):
        e = tuple(Fraction(int(k == i)) for k in range(d1))
        p = _solve(M, e)
        if p is None:
            return None
        particular.append(p)
    dens = {1} | {m**e for m in phi.source.denoms if m > 1 for e in range(1, 3)}
    coeffs = sorted(
        {Fraction(n, d) for n in range(-bound, bound + 1) for d in dens},
        key=lambda q: (abs(q.numerator) + q.denominator, q < 0),
    )[: 2 * bound + 12]
    per_col = []
    for i in range(d1):
        opts = []
        for ts in itertools.product(coeffs, repeat=len(null)):
            v = list(particular[i])
            for t, n in zip(ts, null):
                v = [a + t * b for a, b in zip(v, n)]
            opts.append(tuple(v))
            if len(opts) > 400:
                break
        per_col.append(opts)
    tried = 0
    for cols in itertools.product(*per_col):
        tried += 1
        if tried > 20000:
            break
        S = tuple(tuple(cols[i][j] for i in range(d1)) for j in range(d2))
        sigma = GroupHom(phi.target, phi.source, S)
        if sigma.is_well_defined() and sigma.is_positive():
            return sigma
    return None


@dataclass
class GateResult:
    source: OrderedGroup
    target: OrderedGroup
    hom: GroupHom | None
    section: GroupHom | None
    obstructions: list[str] = field(default_factory=list)
    status: str = ""
    certificate: list[str] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.hom is not None

    def lines(self) -> list[str]:
        head = f"gate {self.source} ->> {self.target}: {self.status}"
        out = [head]
        if self.hom is not None:
            out.append(f"  φ = {self.hom.format_matrix()}")
            if self.section is not None:
                out.append(f"  positive section σ = {self.section.format_matrix()}")
        out += [f"  obstruction: {o}" for o in self.obstructions]
        out += [f"  {c}" for c in self.certificate]
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source.spec(),
            "target": self.target.spec(),
            "status": self.status,
            "hom": None if self.hom is None else [[_fmt_num(x) for x in r] for r in self.hom.matrix],
            "section": None if self.section is None else [[_fmt_num(x) for x in r] for r in self.section.matrix],
            "obstructions": list(self.obstructions),
            "certificate": list(self.certificate),
        }


def gate_obstructions(g2: OrderedGroup, g1: OrderedGroup) -> list[str]:
    """Reasons no surjective unital ``φ: g2 -> g1`` with ``φ(g2+) = g1+`` exists."""
    out = []
    n1, n2 = len(states(g1)), len(states(g2))
    if n1 > n2:
        out.append(
            f"state-count: the target has {n1} extreme states but the source only {n2}; "
            "φ would pull target states back injectively onto extreme source states"
        )
    for i, m1 in enumerate(g1.denoms):
        usable = [j for j, m2 in enumerate(g2.denoms) if prime_factors(m2) <= prime_factors(m1)]
        if not usable:
            out.append(
                f"denominator: coordinate {i + 1} of the target ({_ring_name(m1)}) receives only the zero map; "
                f"every source coordinate inverts a prime that {_ring_name(m1)} does not"
            )
            continue
        for q in sorted(prime_factors(m1)):
            if not any(q in prime_factors(g2.denoms[j]) for j in usable):
                out.append(
                    f"denominator: 1/{q}^k in coordinate {i + 1} of the target ({_ring_name(m1)}) "
                    f"is not reachable; no admissible source coordinate inverts {q}"
                )
    if g2.rank < g1.rank:
        out.append(f"rank: the source has rank {g2.rank} < {g1.rank}")
    return out


def _row_candidates(g2: OrderedGroup, g1: OrderedGroup, i: int, bound: int, exp: int) -> list[Vector]:
    usable = [j for j, m2 in enumerate(g2.denoms) if prime_factors(m2) <= prime_factors(g1.denoms[i])]
    pool = _value_pool(g1.denoms[i], bound, exp)
    target = g1.unit[i]
    rows = []
    for r in range(1, len(usable) + 1):
        for support in itertools.combinations(usable, r):
            solve_at = next((j for j in reversed(support) if g2.unit[j] != 0), None)
            if solve_at is None:
                continue
            others = [j for j in support if j != solve_at]
            for vals in itertools.product([v for v in pool if v != 0], repeat=len(others)):
                row = [Fraction(0)] * g2.rank
                for j, v in zip(others, vals):
                    row[j] = v
                rest = target - sum((row[j] * g2.unit[j] for j in others), Fraction(0))
                x = rest / g2.unit[solve_at]
                if x == 0 or not in_localization(x, g1.denoms[i]):
                    continue
                if abs(x.numerator) > bound or x.denominator > max(g1.denoms[i], 1) ** exp:
                    continue
                row[solve_at] = x
                rows.append(tuple(row))
    if target == 0:
        rows.insert(0, (Fraction(0),) * g2.rank)

    def key(row: Vector) -> tuple:
        support = tuple(j for j, x in enumerate(row) if x)
        return (len(support), 0 if i in support else 1, support, sum(abs(x.numerator) + x.denominator for x in row))

    return sorted(set(rows), key=key)


def gate(g2: OrderedGroup, g1: OrderedGroup, bound: int = 8, exp: int = 4, max_matrices: int = 50000) -> GateResult:
    """Search for ``φ: g2 ->> g1`` with ``φ(1) = 1`` and ``φ(g2+) = g1+``.

    Returns the first hit in a fixed order (sparse rows first, diagonal
    entries preferred), with a positive section as proof of surjectivity
    onto the cone.  If nothing is found the result carries either symbolic
    obstructions or the label ``bounded-search-exhausted``.
    """
    _require_supported(g1)
    _require_supported(g2)
    obstructions = gate_obstructions(g2, g1)
    if obstructions:
        return GateResult(g2, g1, None, None, obstructions, "obstructed")
    rows = [_row_candidates(g2, g1, i, bound, exp) for i in range(g1.rank)]
    tried = 0
    for choice in itertools.product(*rows):
        tried += 1
        if tried > max_matrices:
            break
        M = tuple(choice)
        if matrix_rank(M) < g1.rank or not is_positive_map(g2, g1, M):
            continue
        phi = GroupHom(g2, g1, M)
        if not (phi.is_well_defined() and phi.preserves_unit()):
            continue
        sigma = positive_section(phi, bound, exp)
        if sigma is None:
            continue
        cert = ["well-defined: " + (", ".join(phi.denominator_certificate()) or "zero map")]
        cert.append(f"unit: φ{_fmt_vec(g2.unit)} = {_fmt_vec(phi(g2.unit))}")
        cert.append("positive: closed-form cone rule holds")
        cert.append(f"onto the cone: φ∘σ = id with σ = {sigma.format_matrix()} positive")
        return GateResult(g2, g1, phi, sigma, [], "found", cert)
    return GateResult(
        g2,
        g1,
        None,
        None,
        [],
        "bounded-search-exhausted",
        [f"searched {min(tried, max_matrices)} matrices with |numerators| <= {bound}, denominators | m^{exp}"],
    )


def verify_gate_hom(phi: GroupHom, samples: int = 200, seed: int = 0) -> Report:
    """Sample-based cross-check of the gate conditions for ``phi``."""
    rng = random.Random(seed)
    g2, g1 = phi.source, phi.target
    rep = Report("gate conditions")
    rep.add("well_defined", phi.is_well_defined() and all(g1.contains(phi(g2.sample(rng))) for _ in range(samples)))
    rep.add("unit_preserved", phi.preserves_unit())
    rep.add("positive", all(g1.is_positive(phi(g2.sample_positive(rng))) for _ in range(samples)))
    sigma = positive_section(phi)
    rep.add("surjective_onto_cone", sigma is not None and all(
        phi(sigma(y)) == y and g2.is_positive(sigma(y)) for y in (g1.sample_positive(rng) for _ in range(samples))
    ))
    return rep


def _is_isomorphism(phi: GroupHom) -> bool:
    if phi.source.rank != phi.target.rank:
        return False
    M = phi.matrix
    if matrix_rank(M) < len(M):
        return False
    d = len(M)
    inv_cols = [_solve(M, tuple(Fraction(int(k == i)) for k in range(d))) for i in range(d)]
    inv = tuple(tuple(inv_cols[i][j] for i in range(d)) for j in range(d))
    back = GroupHom(phi.target, phi.source, inv)
    return back.is_well_defined() and back.is_positive() and back.preserves_unit()


@dataclass
class BothWays:
    g1: OrderedGroup
    g2: OrderedGroup
    forward: GateResult
    reverse: GateResult
    isomorphic: bool | None
    iso_note: str
    iso: GroupHom | None = None

    def lines(self) -> list[str]:
        out = ["forward: " + self.forward.lines()[0]] + self.forward.lines()[1:]
        out += ["reverse: " + self.reverse.lines()[0]] + self.reverse.lines()[1:]
        out.append(f"isomorphic: {'yes' if self.isomorphic else 'no' if self.isomorphic is False else 'unknown'} ({self.iso_note})")
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "forward": self.forward.to_dict(),
            "reverse": self.reverse.to_dict(),
            "isomorphic": self.isomorphic,
            "isomorphism_note": self.iso_note,
        }


def gate_both_ways(g1: OrderedGroup, g2: OrderedGroup, bound: int = 8, exp: int = 4) -> BothWays:
    forward = gate(g1, g2, bound, exp)
    reverse = gate(g2, g1, bound, exp)
    if not (forward.found and reverse.found):
        failed = [r for r in (forward, reverse) if not r.found]
        note = "a gate fails, so no unital order isomorphism: " + "; ".join(
            (r.obstructions[0] if r.obstructions else r.status) for r in failed
        )
        return BothWays(g1, g2, forward, reverse, False if any(r.obstructions for r in failed) else None, note)
    if len(states(g1)) != len(states(g2)):
        return BothWays(g1, g2, forward, reverse, False, "state counts differ")
    if g1.rank != g2.rank:
        return BothWays(g1, g2, forward, reverse, False, "ranks differ")
    rows = [_row_candidates(g1, g2, i, bound, exp) for i in range(g2.rank)]
    for n, choice in enumerate(itertools.product(*rows)):
        if n > 50000:
            break
        phi = GroupHom(g1, g2, tuple(choice))
        if phi.is_well_defined() and phi.preserves_unit() and phi.is_positive() and _is_isomorphism(phi):
            return BothWays(g1, g2, forward, reverse, True, f"unital order isomorphism {phi.format_matrix()}", phi)
    return BothWays(g1, g2, forward, reverse, None, "bounded-search-exhausted")


def first_isomorphism_check(phi: GroupHom, g2: OrderedGroup, g1: OrderedGroup, samples: int = 200, seed: int = 0) -> Report:
    """Check that ``g2 / ker φ`` with the image cone and unit is ``g1``."""
    if phi.source != g2 or phi.target != g1:
        raise PreconditionError("φ does not go from g2 to g1")
    if not (phi.is_well_defined() and phi.preserves_unit() and phi.is_positive()):
        raise PreconditionError("φ is not a well-defined positive unital homomorphism")
    sigma = positive_section(phi)
    if sigma is None:
        raise PreconditionError("φ is not onto with φ(G₂⁺) = G₁⁺ (no positive section)")
    rng = random.Random(seed)
    rep = Report("first isomorphism")
    ker = phi.kernel_basis()
    rep.add("kernel", all(not any(phi(k)) for k in ker), f"ker φ spanned by {', '.join(map(_fmt_vec, ker)) or '0'}")
    rep.add("quotient_rank", g2.rank - len(ker) == g1.rank, f"{g2.rank} - {len(ker)} = {g1.rank}")
    basis_ok = all(phi(sigma(e)) == e for e in g1.basis())
    rep.add("induced_map_onto", basis_ok, "φ̂([σ(e_i)]) = e_i on generators")
    classes_ok = True
    for _ in range(samples):
        h = g2.sample(rng)
        if any(phi(_sub(h, sigma(phi(h))))):
            classes_ok = False
    rep.add("induced_map_injective", classes_ok, "h - σφ(h) ∈ ker φ on samples")
    cone_ok = all(g1.is_positive(phi(g2.sample_positive(rng))) for _ in range(samples)) and all(
        g2.is_positive(sigma(y)) for y in (g1.sample_positive(rng) for _ in range(samples))
    )
    rep.add("order_isomorphism", cone_ok, "image cone of G₂⁺ equals G₁⁺")
    rep.add("unit", phi(g2.unit) == g1.unit)
    return rep


# ---------------------------------------------------------------- odometers


def k0_of_odometer(system: OdometerSystem) -> OrderedGroup:
    """``Z[1/m]`` with ``m`` the product of one period of bases."""
    return OrderedGroup((system.period_product(),), "coordinatewise", (Fraction(1),))


def unit_interval_values(g: OrderedGroup, denominator: int) -> set[Fraction]:
    """Elements ``x`` of a rank-1 group with ``0 <= x <= u`` and ``x·denominator``
    an integer."""
    if g.rank != 1:
        raise PreconditionError("unit interval values are defined here for rank 1")
    out = set()
    for k in range(denominator * max(1, math.ceil(g.unit[0])) + 1):
        x = (Fraction(k, denominator),)
        if g.contains(x) and g.is_positive(x) and g.leq(x, g.unit):
            out.add(x[0])
    return out


# ---------------------------------------------------------------- the example


@dataclass
class Example6:
    group: OrderedGroup
    dyadic: OrderedGroup
    axioms: Report
    states: list[GroupState]
    infinitesimals: Infinitesimals
    gate: GateResult
    both: BothWays
    first_iso: Report

    @property
    def speedup(self) -> bool:
        return self.gate.found

    @property
    def orbit_equivalent(self) -> bool:
        return bool(self.both.isomorphic)

    @property
    def conclusion(self) -> str:
        return f"speedup: {'yes' if self.speedup else 'no'}; orbit equivalence: {'yes' if self.orbit_equivalent else 'no'}"

    @property
    def ok(self) -> bool:
        return (
            self.axioms.ok
            and len(self.states) == 2
            and self.infinitesimals.is_trivial()
            and self.gate.found
            and self.gate.hom.is_projection(0)
            and not self.both.reverse.found
            and any(o.startswith("state-count") for o in self.both.reverse.obstructions)
            and self.speedup
            and not self.orbit_equivalent
            and self.first_iso.ok
        )

    def lines(self) -> list[str]:
        out = [f"group G2 = {self.group}", f"group G1 = {self.dyadic} (dyadic odometer)"]
        out += ["axioms:"] + self.axioms.lines()
        out.append(f"extreme states: {len(self.states)}: " + ", ".join(str(s) for s in self.states))
        out.append(f"infinitesimals: {self.infinitesimals.describe()}")
        out += self.gate.lines()
        if self.gate.hom is not None and self.gate.hom.is_projection(0):
            out.append("  φ is the first-coordinate projection π1")
        out += ["first isomorphism:"] + self.first_iso.lines()
        out += ["both ways:"] + ["  " + line for line in self.both.lines()]
        out.append(f"conclusion: {self.conclusion}")
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "group": self.group.spec(),
            "dyadic": self.dyadic.spec(),
            "axioms": self.axioms.to_dict(),
            "states": [[_fmt_num(c) for c in s.coeffs] for s in self.states],
            "state_count": len(self.states),
            "infinitesimals": self.infinitesimals.describe(),
            "gate": self.gate.to_dict(),
            "gate_is_pi1": bool(self.gate.hom is not None and self.gate.hom.is_projection(0)),
            "first_isomorphism": self.first_iso.to_dict(),
            "both_ways": self.both.to_dict(),
            "conclusion": self.conclusion,
            "ok": self.ok,
        }


def example6(sample_budget: int = 200, seed: int = 0) -> Example6:
    """``Z[1/2]^2`` with the strict cone against the dyadic odometer group."""
    g2 = OrderedGroup((2, 2), "strict", (1, 1))
    g1 = k0_of_odometer(OdometerSystem((2,)))
    axioms = check_axioms(g2, sample_budget, seed)
    sts = states(g2)
    inf = infinitesimals(g2)
    gres = gate(g2, g1)
    first = first_isomorphism_check(gres.hom, g2, g1, seed=seed) if gres.hom is not None else Report("first isomorphism", [])
    both = gate_both_ways(g2, g1)
    return Example6(g2, g1, axioms, sts, inf, gres, both, first)
