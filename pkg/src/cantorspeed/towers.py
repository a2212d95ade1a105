"""Kakutani-Rokhlin tower partitions of an odometer.

A column is a clopen base ``C`` with a height ``h``; its levels are
``T^j C`` for ``0 <= j < h``.  A partition is a list of columns whose levels
tile the space and whose tops are carried by ``T`` onto the union of the
bases.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

from .adic import (
    ClopenSet,
    InvariantMeasure,
    OdometerSystem,
    apply_T,
    format_clopen,
    refine,
    successor_word,
    union_all,
)
from .report import PreconditionError, Report


@dataclass(frozen=True)
class Column:
    base: ClopenSet
    height: int

    def __post_init__(self) -> None:
        if self.height < 1:
            raise ValueError("column height must be positive")

    def level(self, j: int) -> ClopenSet:
        if not 0 <= j < self.height:
            raise IndexError(f"level {j} outside column of height {self.height}")
        return apply_T(self.base, j)

    @property
    def levels(self) -> list[ClopenSet]:
        return [self.level(j) for j in range(self.height)]

    @property
    def top(self) -> ClopenSet:
        return self.level(self.height - 1)


@dataclass(frozen=True)
class KRPartition:
    system: OdometerSystem
    columns: tuple[Column, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        for c in self.columns:
            if c.base.system != self.system:
                raise ValueError("column base lives in a different system")

    @property
    def heights(self) -> list[int]:
        return [c.height for c in self.columns]

    @property
    def bases(self) -> ClopenSet:
        return union_all(self.system, (c.base for c in self.columns))

    @property
    def tops(self) -> ClopenSet:
        return union_all(self.system, (c.top for c in self.columns))

    def all_levels(self) -> list[ClopenSet]:
        return [lv for c in self.columns for lv in c.levels]

    @cached_property
    def depth(self) -> int:
        """A depth at which every level is a union of cylinders."""
        return max((c.base.canonical().depth for c in self.columns), default=0)

    def mass(self, m: InvariantMeasure) -> Fraction:
        return sum((c.height * m(c.base) for c in self.columns), Fraction(0))

    def check(self) -> Report:
        """Verify the partition invariants word by word at :attr:`depth`.

        Level images are recomputed with the digit-carry successor rather
        than the integer shift used to build them.
        """
        rep = Report("tower partition")
        n = self.depth
        seen: dict[tuple, tuple[int, int]] = {}
        overlap = None
        level_words: list[list[set]] = []
        for i, col in enumerate(self.columns):
            rows = []
            for j, lv in enumerate(col.levels):
                words = set(refine(lv.canonical(), n).words)
                rows.append(words)
                for w in words:
                    if w in seen and overlap is None:
                        overlap = (w, seen[w], (i, j))
                    seen[w] = (i, j)
            level_words.append(rows)
        total = self.system.denominator(n)
        rep.add(
            "levels_disjoint",
            overlap is None,
            "" if overlap is None else f"word {overlap[0]} in levels {overlap[1]} and {overlap[2]}",
        )
        rep.add("levels_cover", len(seen) == total, f"{len(seen)} of {total} cylinders covered")
        stacked = True
        for rows in level_words:
            for j in range(len(rows) - 1):
                if {successor_word(self.system, w) for w in rows[j]} != rows[j + 1]:
                    stacked = False
        rep.add("T_moves_up_one_level", stacked)
        tops = {successor_word(self.system, w) for rows in level_words for w in rows[-1]}
        bases = {w for rows in level_words for w in rows[0]}
        rep.add("T_maps_tops_onto_bases", tops == bases)
        return rep

    def refines(self, other: KRPartition) -> bool:
        """Every level of ``self`` lies inside a single level of ``other``."""
        theirs = other.all_levels()
        for lv in self.all_levels():
            if not any(lv.issubset(t) for t in theirs):
                return False
        return True

    def report_lines(self) -> list[str]:
        return [f"base={format_clopen(c.base)} height={c.height}" for c in self.columns]

    def summary(self) -> str:
        n = len(self.columns)
        hs = ", ".join(str(h) for h in self.heights)
        return f"{n} column{'s' if n != 1 else ''}, height{'s' if n != 1 else ''} {hs}"


@dataclass(frozen=True)
class ReturnTimeProfile:
    """First-return decomposition of a clopen set."""

    target: ClopenSet
    pieces: tuple[tuple[ClopenSet, int], ...]

    @property
    def times(self) -> list[int]:
        return [t for _, t in self.pieces]

    def time_of(self, word: Sequence[int]) -> int:
        for piece, t in self.pieces:
            if piece.contains_word(word):
                return t
        raise KeyError(f"{word} is not inside a single piece")

    def check(self) -> Report:
        rep = Report("return times")
        a = self.target
        parts = [p for p, _ in self.pieces]
        rep.add("pieces_partition_target", union_all(a.system, parts) == a and _pairwise_disjoint(parts))
        ok = True
        for piece, t in self.pieces:
            if not apply_T(piece, t).issubset(a):
                ok = False
            for s in range(1, t):
                if not apply_T(piece, s).isdisjoint(a):
                    ok = False
        rep.add("first_return", ok)
        return rep


def _pairwise_disjoint(sets: Sequence[ClopenSet]) -> bool:
    if not sets:
        return True
    system = sets[0].system
    n = max(s.canonical().depth for s in sets)
    seen: set[int] = set()
    total = 0
    for s in sets:
        ints = refine(s.canonical(), n).ints
        seen |= ints
        total += len(ints)
    return len(seen) == total and all(s.system == system for s in sets)


def return_times(m: InvariantMeasure, a: ClopenSet) -> ReturnTimeProfile:
    """Exact first-return times to ``a``.

    At the representation depth ``n`` of ``a`` the odometer is the cyclic
    shift on ``D(n)`` cylinders, so the return time of cylinder ``k`` is the
    cyclic gap to the next code of ``a``.
    """
    if a.is_empty():
        raise PreconditionError("return times need a nonempty set")
    c = a.canonical()
    D = a.system.denominator(c.depth)
    codes = sorted(c.ints)
    by_time: dict[int, list[int]] = defaultdict(list)
    for idx, k in enumerate(codes):
        nxt = codes[(idx + 1) % len(codes)]
        by_time[(nxt - k) % D or D].append(k)
    pieces = tuple(
        (ClopenSet.from_ints(a.system, c.depth, ks).canonical(), t) for t, ks in sorted(by_time.items())
    )
    return ReturnTimeProfile(c, pieces)


def tower_over_base(m: InvariantMeasure, base: ClopenSet) -> KRPartition:
    """One column per first-return time of ``base``."""
    if base.is_empty():
        raise PreconditionError("a tower needs a nonempty base")
    profile = return_times(m, base)
    return KRPartition(base.system, tuple(Column(p, t) for p, t in profile.pieces))


def tall_tower(m: InvariantMeasure, n: int) -> KRPartition:
    """A single-column tower of height greater than ``n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d = 1
    while m.system.denominator(d) <= n:
        d += 1
    return tower_over_base(m, m.system.cylinder((0,) * d))


def _cell_index(q: Sequence[ClopenSet], n: int) -> list[int]:
    """Map every depth-``n`` code to the index of its cell in ``q``."""
    system = q[0].system
    D = system.denominator(n)
    cell = [-1] * D
    for idx, part in enumerate(q):
        for k in refine(part.canonical(), n).ints:
            if cell[k] != -1:
                raise PreconditionError(f"cells {cell[k]} and {idx} overlap")
            cell[k] = idx
    if -1 in cell:
        raise PreconditionError("cells do not cover the whole space")
    return cell


def itinerary_classes(p: KRPartition, q: Sequence[ClopenSet]) -> list[tuple[Column, tuple[int, ...], ClopenSet]]:
    """Split each column base by the sequence of ``q``-cells its levels visit.

    Returns ``(old column, itinerary, sub-base)`` triples; columns keep their
    order and sub-bases within a column are sorted by their least code.
    """
    q = list(q)
    if not q:
        raise PreconditionError("empty partition")
    for s in q:
        if s.system != p.system:
            raise ValueError("partition cell lives in a different system")
    n = max(p.depth, max(s.canonical().depth for s in q))
    # empty cells are allowed and simply never visited
    cell = _cell_index(q, n)
    D = p.system.denominator(n)
    out = []
    for col in p.columns:
        groups: dict[tuple[int, ...], list[int]] = {}
        for b in sorted(refine(col.base.canonical(), n).ints):
            key = tuple(cell[(b + j) % D] for j in range(col.height))
            groups.setdefault(key, []).append(b)
        for key, codes in groups.items():
            out.append((col, key, ClopenSet.from_ints(p.system, n, codes).canonical()))
    return out


def refine_tower(p: KRPartition, q: Sequence[ClopenSet]) -> KRPartition:
    """Split the columns of ``p`` so that every level sits inside one cell of ``q``."""
    classes = itinerary_classes(p, q)
    return KRPartition(p.system, tuple(Column(base, col.height) for col, _, base in classes))


def nested_towers(
    m: InvariantMeasure, target_word: Sequence[int], count: int, start_depth: int = 1
) -> list[KRPartition]:
    """Towers over the cylinders of a fixed point at depths ``start_depth``,
    ``start_depth + 1``, ...; the point is ``target_word`` followed by zeros.

    The levels of the k-th tower are all cylinders of depth
    ``start_depth + k``, so the sequence is refining and generating.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if start_depth < 1:
        raise ValueError("start_depth must be >= 1")
    word = tuple(target_word)
    if not m.system.is_valid_word(word):
        raise ValueError(f"invalid digits {word} for {m.system}")
    towers = []
    for k in range(count):
        d = start_depth + k
        prefix = (word + (0,) * d)[:d]
        towers.append(tower_over_base(m, m.system.cylinder(prefix)))
    return towers
