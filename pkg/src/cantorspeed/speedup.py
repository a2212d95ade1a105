"""Speedup maps ``S(x) = T^{p(x)} x`` with clopen level sets.

Constructions here follow the chain: equal-measure selection inside a clopen
set, a one-sided injection built column by column in a tall tower, an
induction step that intertwines a forward injection with a backward one,
and a truncated limit of such steps.  The last part copies a tower from a
second odometer and turns the copy into a partial speedup together with a
level-to-level set conjugacy.

Every map is a finite list of pieces ``(E, k)`` meaning ``S = T^k`` on ``E``.
Nothing is validated at construction time; :func:`verify_speedup` does that,
including a word-level brute-force pass that does not use the integer
encoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .adic import (
    ClopenSet,
    InvariantMeasure,
    OdometerSystem,
    Point,
    Word,
    add_to_word,
    apply_T,
    format_clopen,
    format_rational,
    format_word,
    is_minimal_power,
    parse_clopen,
    reflect,
    refine,
    union_all,
)
from .report import PreconditionError, Report
from .towers import (
    Column,
    KRPartition,
    _pairwise_disjoint,
    itinerary_classes,
    return_times,
    tall_tower,
    tower_over_base,
)


@dataclass(frozen=True)
class Piece:
    domain: ClopenSet
    jump: int
    case: str = ""
    source_level: int | None = None
    target_level: int | None = None
    return_time: int | None = None
    column_height: int | None = None

    @property
    def image(self) -> ClopenSet:
        return apply_T(self.domain, self.jump)


@dataclass(frozen=True)
class ColumnAssignment:
    """How one refined column of a tall tower was matched: A-levels ``J``,
    B-levels ``K`` and the injection ``gamma`` between them."""

    column: int
    base: ClopenSet
    height: int
    J: tuple[int, ...]
    K: tuple[int, ...]
    gamma: Mapping[int, int]

    def is_valid(self) -> bool:
        values = list(self.gamma.values())
        return (
            len(self.J) <= len(self.K)
            and set(self.gamma) == set(self.J)
            and len(set(values)) == len(values)
            and set(values) <= set(self.K)
        )


@dataclass(frozen=True)
class SpeedupMap:
    system: OdometerSystem
    pieces: tuple[Piece, ...]
    assignments: tuple[ColumnAssignment, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "assignments", tuple(self.assignments))

    def __add__(self, other: SpeedupMap) -> SpeedupMap:
        if other.system != self.system:
            raise ValueError("maps live in different systems")
        return SpeedupMap(self.system, self.pieces + other.pieces, self.assignments + other.assignments)

    def domain(self) -> ClopenSet:
        return union_all(self.system, (p.domain for p in self.pieces))

    def image(self) -> ClopenSet:
        return union_all(self.system, (p.image for p in self.pieces))

    def image_of(self, e: ClopenSet) -> ClopenSet:
        """``S(e)``; parts of ``e`` outside the domain are ignored."""
        return union_all(self.system, (apply_T(e & p.domain, p.jump) for p in self.pieces))

    def jumps(self) -> list[int]:
        return sorted({p.jump for p in self.pieces})

    def level_set(self, k: int) -> ClopenSet:
        """``{x : p(x) = k}``."""
        return union_all(self.system, (p.domain for p in self.pieces if p.jump == k))

    @property
    def depth(self) -> int:
        return max((p.domain.canonical().depth for p in self.pieces), default=0)

    def code_table(self, n: int) -> dict[int, int]:
        """``S`` on depth-``n`` cylinder codes (``n`` at least :attr:`depth`)."""
        D = self.system.denominator(n)
        table: dict[int, int] = {}
        for p in self.pieces:
            for k in refine(p.domain.canonical(), n).ints:
                table[k] = (k + p.jump) % D
        return table

    def lines(self) -> list[str]:
        """One ``<words> -> jump <k>`` line per value of ``p``."""
        return [f"{format_clopen(self.level_set(k))} -> jump {k}" for k in self.jumps()]

    def to_dict(self) -> dict[str, Any]:
        return {
            "bases": list(self.system.bases),
            "pieces": [{"set": format_clopen(self.level_set(k)), "jump": k} for k in self.jumps()],
        }


def parse_map(system: OdometerSystem, text: str) -> SpeedupMap:
    pieces = []
    for raw in text.replace(";", "\n").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            lhs, rhs = line.split("->")
            word, k = rhs.split()
            if word != "jump":
                raise ValueError
            pieces.append(Piece(parse_clopen(system, lhs), int(k), "parsed"))
        except ValueError:
            raise ValueError(f"bad map line {line!r}; expected '<words> -> jump <k>'") from None
    return SpeedupMap(system, tuple(pieces))


def verify_speedup(
    smap: SpeedupMap,
    expected_domain: ClopenSet,
    expected_image: ClopenSet | None = None,
    *,
    image_within: ClopenSet | None = None,
    depth: int | None = None,
) -> Report:
    """Check a speedup map against its declared domain and image.

    ``expected_image`` asks for an exact image; ``image_within`` only for
    containment.  The brute-force pass enumerates every depth-``depth``
    cylinder of the domain and moves it with schoolbook digit addition.
    """
    system = smap.system
    m = InvariantMeasure(system)
    rep = Report("speedup verification")
    bad_jumps = [p.jump for p in smap.pieces if p.jump < 1]
    rep.add("jumps_positive", not bad_jumps, f"non-positive jumps {bad_jumps}" if bad_jumps else "")
    domains = [p.domain for p in smap.pieces]
    images = [p.image for p in smap.pieces]
    rep.add("domains_disjoint", _pairwise_disjoint(domains))
    dom = smap.domain()
    rep.add("domain_exact", dom == expected_domain, f"domain {format_clopen(dom)}")
    rep.add("images_disjoint", _pairwise_disjoint(images), "injectivity")
    img = smap.image()
    if expected_image is not None:
        rep.add("image_exact", img == expected_image, f"image {format_clopen(img)}")
    if image_within is not None:
        rep.add("image_within", img.issubset(image_within))
    bad = [i for i, p in enumerate(smap.pieces) if m(p.image) != m(p.domain)]
    rep.add("measure_preserved", not bad, "μ(S(E)) = μ(E) on every piece" if not bad else f"pieces {bad}")
    level_sets = [smap.level_set(k) for k in smap.jumps()]
    rep.add(
        "level_sets_clopen",
        union_all(system, level_sets) == dom,
        f"p takes {len(level_sets)} value(s), each on a clopen set",
    )

    n = max(
        depth or 0,
        smap.depth,
        expected_domain.canonical().depth,
        expected_image.canonical().depth if expected_image is not None else 0,
        image_within.canonical().depth if image_within is not None else 0,
    )
    sources: list[Word] = []
    targets: list[Word] = []
    for p in smap.pieces:
        if p.jump < 1:
            continue
        for w in refine(p.domain.canonical(), n).words:
            sources.append(w)
            targets.append(add_to_word(system, w, p.jump))
    injective = len(set(targets)) == len(targets) and len(set(sources)) == len(sources)
    ok = injective and set(sources) == set(refine(expected_domain.canonical(), n).words)
    if expected_image is not None:
        ok = ok and set(targets) == set(refine(expected_image.canonical(), n).words)
    if image_within is not None:
        ok = ok and set(targets) <= set(refine(image_within.canonical(), n).words)
    rep.add("brute_force", ok, f"{len(sources)} depth-{n} cylinders moved by digit addition")
    return rep


# ---------------------------------------------------------------- selection


def _select(value: Fraction, pool: ClopenSet, m: InvariantMeasure | None = None) -> ClopenSet:
    """Lexicographically least sub-cylinders of ``pool`` of total measure ``value``,
    taken at the first depth where ``value`` is a whole number of cylinders."""
    system = pool.system
    m = m or InvariantMeasure(system)
    value = Fraction(value)
    if value == 0:
        return system.empty()
    if value < 0 or value > m(pool):
        raise PreconditionError(f"cannot select measure {format_rational(value)} inside a set of measure {format_rational(m(pool))}")
    c = pool.canonical()
    n = c.depth
    while (value * system.denominator(n)).denominator != 1:
        n += 1
        if n > c.depth + 256:
            raise PreconditionError(f"{format_rational(value)} is not a clopen value of {system}")
    count = int(value * system.denominator(n))
    return ClopenSet(system, n, refine(c, n).words[:count]).canonical()


def subset_condition(m: InvariantMeasure, a: ClopenSet, b: ClopenSet) -> ClopenSet:
    """A clopen ``b1 ⊆ b`` with ``μ(b1) = μ(a)``, for ``μ(a) < μ(b)``."""
    if a.is_empty():
        return m.system.empty()
    if m(a) >= m(b):
        raise PreconditionError("μ(A) ≥ μ(B)")
    return _select(m(a), b, m)


def transfer_partition(m: InvariantMeasure, a_parts: Sequence[ClopenSet], b: ClopenSet) -> list[ClopenSet]:
    """Split ``b`` into cells whose measures match the cells of ``a_parts``."""
    a_parts = list(a_parts)
    if not a_parts:
        raise PreconditionError("no cells to transfer")
    if not _pairwise_disjoint(a_parts):
        raise PreconditionError("cells of A overlap")
    a = union_all(m.system, a_parts)
    if m(a) != m(b):
        raise PreconditionError("μ(A) ≠ μ(B)")
    if not a.isdisjoint(b):
        raise PreconditionError("A ∩ B ≠ ∅")
    out = []
    remaining = b
    for part in a_parts[:-1]:
        cell = _select(m(part), remaining, m)
        out.append(cell)
        remaining = remaining - cell
    out.append(remaining)
    return out


# ---------------------------------------------------------------- injection


def _greedy_gamma(J: Sequence[int], K: Sequence[int]) -> dict[int, int]:
    """A-levels bottom-up, each to the lowest free B-level above it,
    otherwise the lowest free B-level below."""
    free = sorted(K)
    gamma = {}
    for j in sorted(J):
        above = [k for k in free if k > j]
        k = above[0] if above else free[0]
        gamma[j] = k
        free.remove(k)
    return gamma


def _require_pair(m: InvariantMeasure, a: ClopenSet, b: ClopenSet) -> None:
    if a.system != m.system or b.system != m.system:
        raise PreconditionError("sets live in a different system")
    if a.is_empty():
        raise PreconditionError("A is empty")
    if b.is_empty():
        raise PreconditionError("B is empty")
    if not a.isdisjoint(b):
        raise PreconditionError("A and B are not disjoint")


def construct_injection(m: InvariantMeasure, a: ClopenSet, b: ClopenSet) -> SpeedupMap:
    """A positive-jump homeomorphism from ``a`` onto part of ``b``.

    Takes successively taller towers, splits them by their itineraries
    through ``a``, ``b`` and the rest, and stops once no column has more
    A-levels than B-levels.  Inside a column an A-level is sent up to its
    B-level directly, or, when the B-level lies below, through the first
    return to the A-level and then down.
    """
    _require_pair(m, a, b)
    if m(a) >= m(b):
        raise PreconditionError("μ(A) ≥ μ(B)")
    cells = [a, b, ~(a | b)]
    n = 1
    while True:
        tower = tall_tower(m, n)
        classes = itinerary_classes(tower, cells)
        if all(key.count(0) <= key.count(1) for _, key, _ in classes):
            break
        n = tower.columns[0].height

    pieces: list[Piece] = []
    assignments = []
    for idx, (col, key, base) in enumerate(classes):
        h = col.height
        J = tuple(j for j, c in enumerate(key) if c == 0)
        K = tuple(j for j, c in enumerate(key) if c == 1)
        gamma = _greedy_gamma(J, K)
        assignments.append(ColumnAssignment(idx, base, h, J, K, gamma))
        for j in J:
            k = gamma[j]
            level = apply_T(base, j)
            if k > j:
                pieces.append(Piece(level, k - j, "case1", j, k, None, h))
                continue
            for part, lam in return_times(m, level).pieces:
                pieces.append(Piece(part, lam + k - j, "case2", j, k, lam, h))
    return SpeedupMap(m.system, tuple(pieces), tuple(assignments))


def inverse_injection(m: InvariantMeasure, u: ClopenSet, target: ClopenSet) -> SpeedupMap:
    """Positive-jump pieces carrying part of ``target`` onto all of ``u``.

    This is the inverse of a ``T^{-1}``-speedup injection of ``u`` into
    ``target``.  Digit reflection conjugates ``T`` to ``T^{-1}``, so the
    injection is built for ``T`` on the reflected sets and reflected back.
    """
    fwd = construct_injection(m, reflect(u), reflect(target))
    pieces = []
    for p in fwd.pieces:
        pieces.append(
            Piece(reflect(p.image), p.jump, "inverse-" + p.case, p.target_level, p.source_level, p.return_time, p.column_height)
        )
    return SpeedupMap(m.system, tuple(pieces))


# ---------------------------------------------------------------- induction


def _membership_depth(point: Point, s: ClopenSet, name: str) -> int:
    c = s.canonical()
    if point.prefix(c.depth) not in set(c.words):
        raise PreconditionError(f"the point {format_word(point.prefix(max(c.depth, 1)))}... is not in {name}")
    return c.depth


def induction_step(
    m: InvariantMeasure,
    a: ClopenSet,
    b: ClopenSet,
    x_word: Sequence[int],
    y_word: Sequence[int],
    depth_step: int,
    target_depth: int | None = None,
) -> tuple[ClopenSet, ClopenSet, SpeedupMap]:
    """One shrinking step: returns ``(a1, b1, partial)`` with ``partial``
    carrying ``a - a1`` onto ``b - b1``.

    ``x_word`` and ``y_word`` name the points obtained by padding with
    zeros.  The new B-set is the cylinder of ``y`` at a depth ``n`` no
    smaller than ``target_depth``; the A side starts from the cylinder of
    ``x`` one level up, so that it is strictly heavier than ``b1``.
    """
    system = m.system
    _require_pair(m, a, b)
    if m(a) != m(b):
        raise PreconditionError("μ(A) ≠ μ(B)")
    if depth_step < 1:
        raise PreconditionError("depth_step must be positive")
    x = Point(system, tuple(x_word))
    y = Point(system, tuple(y_word))
    dx = _membership_depth(x, a, "A")
    dy = _membership_depth(y, b, "B")
    mu = m(a)
    n = target_depth if target_depth is not None else max(a.canonical().depth, b.canonical().depth) + depth_step
    D = system.denominator
    while not (n - 1 >= dx and n >= dy and Fraction(1, D(n - 1)) < mu and Fraction(1, D(n)) < mu / 2):
        n += 1

    a13 = x.cylinder(n - 1)
    b1 = y.cylinder(n)
    first = construct_injection(m, a - a13, b - b1)
    u1 = (b - b1) - first.image()
    a23 = x.cylinder(n + 1)
    second = inverse_injection(m, u1, a13 - a23)
    l1 = (a13 - a23) - second.domain()
    a1 = a23 | l1
    return a1, b1, first + second


@dataclass(frozen=True)
class StageRecord:
    stage: int
    a: ClopenSet
    b: ClopenSet
    target_depth: int
    mapped: Fraction

    @property
    def depth(self) -> int:
        return max(self.a.canonical().depth, self.b.canonical().depth)


@dataclass(frozen=True)
class StageLedger:
    """The shrinking targets of a truncated bijection and the point pair
    ``y = T^n x`` at which the limit map would be completed with ``p = n``."""

    system: OdometerSystem
    a: ClopenSet
    b: ClopenSet
    records: tuple[StageRecord, ...]
    x: Point
    y: Point
    n: int

    @property
    def stages(self) -> int:
        return len(self.records)

    @property
    def residual_a(self) -> ClopenSet:
        return self.records[-1].a if self.records else self.a

    @property
    def residual_b(self) -> ClopenSet:
        return self.records[-1].b if self.records else self.b

    def residual(self) -> Fraction:
        return InvariantMeasure(self.system)(self.residual_a)

    def measures(self) -> list[Fraction]:
        m = InvariantMeasure(self.system)
        return [m(self.a)] + [m(r.a) for r in self.records]

    def check(self) -> Report:
        m = InvariantMeasure(self.system)
        rep = Report("stage ledger")
        chain_a = [self.a] + [r.a for r in self.records]
        chain_b = [self.b] + [r.b for r in self.records]
        rep.add("nested", all(chain_a[i + 1].issubset(chain_a[i]) and chain_b[i + 1].issubset(chain_b[i]) for i in range(self.stages)))
        rep.add("equal_measures", all(m(p) == m(q) for p, q in zip(chain_a, chain_b)))
        rep.add("halving", all(m(chain_a[i + 1]) < m(chain_a[i]) / 2 for i in range(self.stages)))
        rep.add("points_kept", all(self.x in p for p in chain_a) and all(self.y in q for q in chain_b))
        rep.add(
            "residual_bound",
            self.residual() < m(self.a) / 2**self.stages,
            f"residual {format_rational(self.residual())}",
        )
        depth = max(len(self.x.word), 1) + self.stages + 8
        rep.add("y_is_T^n_x", add_to_word(self.system, self.x.prefix(depth), self.n) == self.y.prefix(depth), f"n = {self.n}")
        return rep

    def to_dict(self) -> dict[str, Any]:
        return {
            "stages": [
                {
                    "stage": r.stage,
                    "A": format_clopen(r.a),
                    "B": format_clopen(r.b),
                    "measure": format_rational(InvariantMeasure(self.system)(r.a)),
                    "target_depth": r.target_depth,
                }
                for r in self.records
            ],
            "residual": format_rational(self.residual()),
            "x": format_word(self.x.prefix(len(self.x.word))),
            "y": format_word(self.y.prefix(len(self.y.word))),
            "n": self.n,
        }


def _hitting_pair(m: InvariantMeasure, a: ClopenSet, b: ClopenSet) -> tuple[Point, Point, int]:
    """``x`` = least word of ``a`` padded with zeros, ``y = T^n x`` for the
    least ``n >= 1`` landing in ``b``; ``y`` again as a zero-padded word."""
    system = m.system
    ca, cb = a.canonical(), b.canonical()
    x = Point(system, ca.words[0])
    bwords = set(cb.words)
    n = 1
    while x.shifted(n).prefix(cb.depth) not in bwords:
        n += 1
    code = system.word_to_int(x.word) + n
    length = len(x.word)
    while code >= system.denominator(length):
        length += 1
    return x, Point(system, system.int_to_word(code, length)), n


def construct_bijection(
    m: InvariantMeasure, a: ClopenSet, b: ClopenSet, stages: int, depth_step: int = 2
) -> tuple[SpeedupMap, StageLedger]:
    """Run ``stages`` induction steps from ``(a, b)``.

    The returned map carries ``a - A_k`` onto ``b - B_k``; the residual pair
    and the point pair for the final one-point extension sit in the ledger.
    """
    _require_pair(m, a, b)
    if m(a) != m(b):
        raise PreconditionError("μ(A) ≠ μ(B)")
    if stages < 1:
        raise PreconditionError("stages must be >= 1")
    x, y, n = _hitting_pair(m, a, b)
    d0 = max(a.canonical().depth, b.canonical().depth)
    cur_a, cur_b = a, b
    smap = SpeedupMap(m.system, ())
    records = []
    for k in range(1, stages + 1):
        target = d0 + k * depth_step
        cur_a, cur_b, partial = induction_step(m, cur_a, cur_b, x.word, y.word, depth_step, target)
        smap = smap + partial
        records.append(StageRecord(k, cur_a, cur_b, target, m(a) - m(cur_a)))
    return smap, StageLedger(m.system, a, b, tuple(records), x, y, n)


def close_residual(m: InvariantMeasure, a: ClopenSet, b: ClopenSet) -> SpeedupMap:
    """Pair the cylinders of two disjoint equal-measure clopens in order.

    Each cylinder goes to its partner by the positive power of ``T`` that
    aligns them at the common depth, so the result is an exact bijection.
    """
    if a.is_empty() and b.is_empty():
        return SpeedupMap(m.system, ())
    _require_pair(m, a, b)
    if m(a) != m(b):
        raise PreconditionError("μ(A) ≠ μ(B)")
    n = max(a.canonical().depth, b.canonical().depth)
    D = m.system.denominator(n)
    src = sorted(refine(a.canonical(), n).ints)
    dst = sorted(refine(b.canonical(), n).ints)
    pieces = [Piece(ClopenSet.from_ints(m.system, n, [s]), (t - s) % D, "matched") for s, t in zip(src, dst)]
    return SpeedupMap(m.system, tuple(pieces))


def power_speedup(m: InvariantMeasure, k: int, depth: int | None = None) -> SpeedupMap:
    """``T^k`` as a single-piece speedup, once ``T^k`` is seen to be minimal."""
    if k < 1:
        raise PreconditionError("k must be positive")
    depth = depth or m.system.period
    for d in range(1, depth + 1):
        if not is_minimal_power(m.system, k, d):
            raise PreconditionError(f"T^{k} is not minimal: it splits the depth-{d} cylinders into several cycles")
    return SpeedupMap(m.system, (Piece(m.system.whole(), k, "power"),))


# ---------------------------------------------------------------- tower copy


@dataclass(frozen=True)
class PrefixHomeomorphism:
    """A homeomorphism ``F: X1 -> X2`` that rewrites a fixed-length prefix
    and copies the tail digits unchanged.

    ``table`` pairs each depth-``d1`` word of ``X1`` with a depth-``d2`` word
    of ``X2``.  The tails must run over the same bases and ``D1(d1)`` must
    equal ``D2(d2)``; then ``F`` pushes the product measure of ``X1`` to that
    of ``X2``.
    """

    source: OdometerSystem
    target: OdometerSystem
    table: tuple[tuple[Word, Word], ...]

    def __post_init__(self) -> None:
        table = tuple((tuple(u), tuple(v)) for u, v in self.table)
        object.__setattr__(self, "table", table)
        d1 = len(table[0][0]) if table else 0
        d2 = len(table[0][1]) if table else 0
        if self.source.denominator(d1) != self.target.denominator(d2):
            raise ValueError("prefix depths carry different numbers of cylinders")
        lhs = [u for u, _ in table]
        rhs = [v for _, v in table]
        if sorted(lhs) != list(self.source.words(d1)) or sorted(rhs) != list(self.target.words(d2)):
            raise ValueError("the prefix table is not a bijection of cylinders")
        span = self.source.period * self.target.period
        if any(self.source.base(d1 + i) != self.target.base(d2 + i) for i in range(span)):
            raise ValueError("tail bases differ; the tail cannot be copied")

    @classmethod
    def identity(cls, system: OdometerSystem) -> PrefixHomeomorphism:
        return cls(system, system, (((), ()),))

    @classmethod
    def from_words(cls, source: OdometerSystem, target: OdometerSystem, mapping: Mapping[str, str]) -> PrefixHomeomorphism:
        from .adic import parse_word

        return cls(source, target, tuple((parse_word(u), parse_word(v)) for u, v in mapping.items()))

    @property
    def depths(self) -> tuple[int, int]:
        return len(self.table[0][0]), len(self.table[0][1])

    def _move(self, e: ClopenSet, forward: bool) -> ClopenSet:
        d1, d2 = self.depths
        din, dout = (d1, d2) if forward else (d2, d1)
        sys_out = self.target if forward else self.source
        lookup = {u: v for u, v in self.table} if forward else {v: u for u, v in self.table}
        c = e.canonical()
        n = max(c.depth, din)
        words = [lookup[w[:din]] + w[din:] for w in refine(c, n).words]
        return ClopenSet(sys_out, n - din + dout, tuple(words)).canonical()

    def image(self, e: ClopenSet) -> ClopenSet:
        return self._move(e, True)

    def inverse_image(self, e: ClopenSet) -> ClopenSet:
        return self._move(e, False)


@dataclass(frozen=True)
class PhiRow:
    column: int
    level: int
    source: ClopenSet
    target: ClopenSet


@dataclass
class ConjugacyStage:
    source: InvariantMeasure
    target: InvariantMeasure
    f: PrefixHomeomorphism
    a0: ClopenSet
    z0: ClopenSet
    x: Point
    q_tower: KRPartition
    levels: list[list[ClopenSet]]
    speedup: SpeedupMap
    refined: list[tuple[int, ClopenSet, int]]
    q_bases: list[ClopenSet]
    phi: list[PhiRow] = field(default_factory=list)
    generating_depth: int = 1

    @property
    def bases(self) -> ClopenSet:
        return union_all(self.source.system, (col[0] for col in self.levels))

    @property
    def tops(self) -> ClopenSet:
        return union_all(self.source.system, (col[-1] for col in self.levels))

    def reference_measure(self, i: int, j: int) -> Fraction:
        return self.source(self.f.inverse_image(self.q_tower.columns[i].level(j)))

    def check(self) -> Report:
        m1, m2 = self.source, self.target
        X1 = m1.system
        rep = Report("conjugacy stage")
        rep.add(
            "level_measures_exact",
            all(m1(lv) == self.reference_measure(i, j) for i, col in enumerate(self.levels) for j, lv in enumerate(col)),
        )
        flat = [lv for col in self.levels for lv in col]
        rep.add("levels_partition", _pairwise_disjoint(flat) and union_all(X1, flat).is_whole())
        rep.add("bases_inside_A0", self.bases.issubset(self.a0))
        rep.add("x_in_bases", self.x in self.bases)
        rep.add("tops_inside_T^-1_A0", self.tops.issubset(self.z0))
        rep.add("T^-1_x_in_tops", self.x.shifted(-1) in self.tops)
        v = verify_speedup(self.speedup, ~self.tops, ~self.bases)
        rep.extend(v, "speedup.")
        rep.add(
            "S_moves_levels_up",
            all(self.speedup.image_of(col[j]) == col[j + 1] for col in self.levels for j in range(len(col) - 1)),
        )
        rep.add("phi_measures", all(m1(r.source) == m2(r.target) for r in self.phi))
        rows = {(r.column, r.level): r for r in self.phi}
        consistent = True
        for (c, j), r in rows.items():
            nxt = rows.get((c, j + 1))
            if nxt is None:
                continue
            if self.speedup.image_of(r.source) != nxt.source or apply_T(r.target, 1) != nxt.target:
                consistent = False
        rep.add("phi_conjugates_S_to_T2", consistent)
        src = [r.source for r in self.phi]
        tgt = [r.target for r in self.phi]
        rep.add("P0_partitions_X1", _pairwise_disjoint(src) and union_all(X1, src).is_whole())
        rep.add("Q0_partitions_X2", _pairwise_disjoint(tgt) and union_all(m2.system, tgt).is_whole())
        g = self.generating_depth
        rep.add("P0_refines_depth_g", all(_inside_one_cylinder(s, g) for s in src))
        rep.add(
            "Q0_refines_Q",
            all(any(b.issubset(col.base) for col in self.q_tower.columns) for b in self.q_bases),
        )
        return rep

    def phi_lines(self) -> list[str]:
        return [f"col {r.column} level {r.level}: {format_clopen(r.source)} -> {format_clopen(r.target)}" for r in self.phi]


def _inside_one_cylinder(s: ClopenSet, g: int) -> bool:
    c = s.canonical()
    words = refine(c, max(c.depth, g)).words
    return len({w[:g] for w in words}) == 1


def _levels_partition(levels: list[list[ClopenSet]], e: ClopenSet) -> list[tuple[int, int, ClopenSet]]:
    out = []
    for i, col in enumerate(levels):
        for j, lv in enumerate(col):
            part = e & lv
            if not part.is_empty():
                out.append((i, j, part))
    return out


def _exchange(m: InvariantMeasure, levels: list[list[ClopenSet]], incoming: ClopenSet, outgoing: ClopenSet, i: int, j: int) -> None:
    """Put ``incoming`` into level ``(i, j)`` and ``outgoing`` (inside that
    level, same measure, disjoint from ``incoming``) out of it, giving each
    other level back exactly the measure it loses."""
    parts = _levels_partition(levels, incoming)
    cells = transfer_partition(m, [p for _, _, p in parts], outgoing)
    levels[i][j] = (levels[i][j] - outgoing) | incoming
    for (i2, j2, p), cell in zip(parts, cells):
        levels[i2][j2] = (levels[i2][j2] - p) | cell


def _push_into(m: InvariantMeasure, levels: list[list[ClopenSet]], pick: int, region: ClopenSet) -> None:
    """Make level ``pick`` of every column lie inside ``region``."""
    for i, col in enumerate(levels):
        outside = col[pick] - region
        if outside.is_empty():
            continue
        reserved = union_all(m.system, (c[pick] for c in levels))
        pool = region - reserved
        if m(outside) > m(pool):
            raise PreconditionError("μ(bases) ≥ μ(A₀): the tower is too coarse for ε₀")
        _exchange(m, levels, _select(m(outside), pool, m), outside, i, pick)


def _capture_point(m: InvariantMeasure, levels: list[list[ClopenSet]], pick: int, region: ClopenSet, point: Point) -> None:
    """Trade a small cylinder around ``point`` into level ``pick``."""
    reserved = union_all(m.system, (c[pick] for c in levels))
    if point in reserved:
        return
    free = region - reserved
    n = free.canonical().depth
    if point not in free:
        raise PreconditionError("the target point is not in the region")
    donor = max(range(len(levels)), key=lambda i: m(levels[i][pick]))
    while m(point.cylinder(n)) > m(levels[donor][pick]):
        n += 1
    incoming = point.cylinder(n)
    outgoing = _select(m(incoming), levels[donor][pick], m)
    _exchange(m, levels, incoming, outgoing, donor, pick)


def conjugacy_stage(
    m1: InvariantMeasure,
    m2: InvariantMeasure,
    f: PrefixHomeomorphism,
    a0_word: Sequence[int],
    stage_depth: int,
    inner_stages: int = 1,
    generating_depth: int | None = None,
) -> ConjugacyStage:
    """First finite stage of turning a measure-compatible homeomorphism into
    a speedup.

    A single-column tower of ``X2`` over the zero cylinder of depth
    ``stage_depth`` is pulled back to ``X1``, its bases are moved inside
    ``A0`` (the cylinder of ``a0_word``) and its tops inside ``T^{-1} A0``,
    with the point ``x`` (``a0_word`` padded with zeros) in a base and
    ``T^{-1} x`` in a top.  Level ``j`` is then carried onto level ``j + 1``,
    refined by the depth-``generating_depth`` cylinders along ``S`` orbits,
    and matched with a refinement of the ``X2`` tower.
    """
    X1, X2 = m1.system, m2.system
    if f.source != X1 or f.target != X2:
        raise PreconditionError("F does not map X1 to X2")
    if stage_depth < 1:
        raise PreconditionError("stage_depth must be >= 1")
    a0_word = tuple(a0_word)
    a0 = X1.cylinder(a0_word)
    z0 = apply_T(a0, -1)
    if not a0.isdisjoint(z0):
        raise PreconditionError("A₀ ∩ T⁻¹A₀ ≠ ∅; choose a longer a0 word")
    x = Point(X1, a0_word)
    g = generating_depth if generating_depth is not None else stage_depth

    q_tower = tower_over_base(m2, X2.cylinder((0,) * stage_depth))
    if m2(q_tower.bases) >= m1(a0):
        raise PreconditionError("ν(⋃B_i) ≥ μ(A₀) = ε₀: the tower base is too large")
    if min(q_tower.heights) < 2:
        raise PreconditionError("tower columns need height >= 2")
    levels = [[f.inverse_image(lv) for lv in col.levels] for col in q_tower.columns]

    _push_into(m1, levels, 0, a0)
    _capture_point(m1, levels, 0, a0, x)
    _push_into(m1, levels, -1, z0)
    _capture_point(m1, levels, -1, z0, x.shifted(-1))

    pieces: list[Piece] = []
    smap = SpeedupMap(X1, ())
    for col in levels:
        for j in range(len(col) - 1):
            p, q = col[j], col[j + 1]
            aligned = p & apply_T(q, -1)
            if not aligned.is_empty():
                pieces.append(Piece(aligned, 1, "aligned", j, j + 1))
            rest_a = p - aligned
            rest_b = q - apply_T(aligned, 1)
            if rest_a.is_empty():
                continue
            part, ledger = construct_bijection(m1, rest_a, rest_b, inner_stages)
            smap = smap + part + close_residual(m1, ledger.residual_a, ledger.residual_b)
    smap = SpeedupMap(X1, tuple(pieces)) + smap

    # refine the S-tower by depth-g cylinders along S-orbits
    n = max(smap.depth, g, max(lv.canonical().depth for col in levels for lv in col))
    table = smap.code_table(n)
    Dg = X1.denominator(g)
    refined: list[tuple[int, ClopenSet, int]] = []
    orbit_sets: list[list[ClopenSet]] = []
    for i, col in enumerate(levels):
        h = len(col)
        groups: dict[tuple[int, ...], list[list[int]]] = {}
        for b in sorted(refine(col[0].canonical(), n).ints):
            orbit = [b]
            for _ in range(h - 1):
                orbit.append(table[orbit[-1]])
            key = tuple(k % Dg for k in orbit)
            groups.setdefault(key, []).append(orbit)
        for orbits in groups.values():
            sets = [ClopenSet.from_ints(X1, n, [o[j] for o in orbits]).canonical() for j in range(h)]
            refined.append((i, sets[0], h))
            orbit_sets.append(sets)

    # matching refinement of the X2 bases
    q_bases: list[ClopenSet] = []
    for i, col in enumerate(q_tower.columns):
        mine = [k for k, (ci, _, _) in enumerate(refined) if ci == i]
        remaining = col.base
        for pos, k in enumerate(mine):
            if pos == len(mine) - 1:
                cell = remaining
            else:
                cell = _select(m1(refined[k][1]), remaining, m2)
            remaining = remaining - cell
            q_bases.append(cell)
    phi = []
    for k, ((i, base, h), sets, qb) in enumerate(zip(refined, orbit_sets, q_bases)):
        for j in range(h):
            phi.append(PhiRow(k, j, sets[j], apply_T(qb, j)))

    return ConjugacyStage(m1, m2, f, a0, z0, x, q_tower, levels, smap, refined, q_bases, phi, g)
