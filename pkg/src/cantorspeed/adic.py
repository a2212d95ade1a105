"""Adic odometers over eventually periodic digit bases.

A point of the odometer is a digit sequence ``x_0 x_1 x_2 ...`` with
``0 <= x_i < base(i)``.  The map ``T`` adds one to ``x_0`` and carries to
the right; the all-maximal sequence goes to the all-zero sequence.

On depth-``n`` cylinders ``T`` is the cyclic shift ``k -> k + 1 mod D(n)``
once a word is read as a mixed-radix integer with ``x_0`` the least
significant digit, where ``D(n) = base(0) * ... * base(n - 1)``.  Every set
operation in this module reduces to that fact.

Clopen sets are finite unions of same-depth cylinders.  Words are kept
sorted lexicographically (as digit tuples, most significant position last),
which is also the order used whenever a construction has to pick "the
smallest" words.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Sequence

DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"

Word = tuple[int, ...]


def _minimal_period(bases: tuple[int, ...]) -> tuple[int, ...]:
    r = len(bases)
    for p in range(1, r + 1):
        if r % p == 0 and bases == bases[:p] * (r // p):
            return bases[:p]
    return bases


@lru_cache(maxsize=None)
def _denominator(bases: tuple[int, ...], n: int) -> int:
    r = len(bases)
    full, rest = divmod(n, r)
    return math.prod(bases) ** full * math.prod(bases[:rest])


@dataclass(frozen=True)
class OdometerSystem:
    """The adic odometer whose digit ``i`` ranges over ``[0, bases[i % r])``."""

    bases: tuple[int, ...]

    def __post_init__(self) -> None:
        bases = tuple(int(b) for b in self.bases)
        if not bases:
            raise ValueError("an odometer needs at least one base")
        if any(b < 2 for b in bases):
            raise ValueError(f"every base must be >= 2, got {bases}")
        if any(b > len(DIGITS) for b in bases):
            raise ValueError(f"bases above {len(DIGITS)} have no digit alphabet")
        object.__setattr__(self, "bases", _minimal_period(bases))

    @classmethod
    def parse(cls, text: str) -> OdometerSystem:
        return cls(tuple(int(t) for t in text.replace(" ", "").split(",") if t))

    @property
    def period(self) -> int:
        return len(self.bases)

    def base(self, i: int) -> int:
        return self.bases[i % len(self.bases)]

    def denominator(self, n: int) -> int:
        if n < 0:
            raise ValueError("depth must be non-negative")
        return _denominator(self.bases, n)

    def period_product(self) -> int:
        return math.prod(self.bases)

    # mixed-radix conversions, digit 0 least significant
    def word_to_int(self, word: Sequence[int]) -> int:
        k, scale = 0, 1
        for i, d in enumerate(word):
            k += d * scale
            scale *= self.base(i)
        return k

    def int_to_word(self, k: int, n: int) -> Word:
        digits = []
        for i in range(n):
            k, d = divmod(k, self.base(i))
            digits.append(d)
        return tuple(digits)

    def is_valid_word(self, word: Sequence[int]) -> bool:
        return all(0 <= d < self.base(i) for i, d in enumerate(word))

    def words(self, n: int) -> Iterator[Word]:
        """All depth-``n`` words in lexicographic order."""
        return itertools.product(*(range(self.base(i)) for i in range(n)))

    def cylinder(self, word: Sequence[int] | str) -> ClopenSet:
        if isinstance(word, str):
            word = parse_word(word)
        word = tuple(word)
        return ClopenSet(self, len(word), (word,))

    def whole(self) -> ClopenSet:
        return ClopenSet(self, 0, ((),))

    def empty(self) -> ClopenSet:
        return ClopenSet(self, 0, ())

    def __str__(self) -> str:
        return "bases=" + ",".join(map(str, self.bases))


def parse_word(text: str) -> Word:
    try:
        return tuple(DIGITS.index(c) for c in text.strip().lower())
    except ValueError:
        raise ValueError(f"invalid digit word {text!r}") from None


def format_word(word: Iterable[int]) -> str:
    return "".join(DIGITS[d] for d in word)


def successor_word(system: OdometerSystem, word: Sequence[int]) -> Word:
    """One odometer step on a finite word, digit by digit.

    Kept independent of the integer encoding so it can serve as an oracle.
    """
    out = list(word)
    for i in range(len(out)):
        if out[i] + 1 < system.base(i):
            out[i] += 1
            return tuple(out)
        out[i] = 0
    return tuple(out)


def add_to_word(system: OdometerSystem, word: Sequence[int], amount: int) -> Word:
    """Apply ``T**amount`` (amount >= 0) to a depth-n cylinder by schoolbook
    mixed-radix addition with carry."""
    if amount < 0:
        raise ValueError("amount must be non-negative")
    out = list(word)
    carry = amount
    for i in range(len(out)):
        if not carry:
            break
        carry, out[i] = divmod(out[i] + carry, system.base(i))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class ClopenSet:
    """A finite union of depth-``depth`` cylinders.

    The stored representation need not be canonical (``refine`` produces
    deeper representations on purpose); equality and hashing go through
    :meth:`canonical`.
    """

    system: OdometerSystem
    depth: int
    words: tuple[Word, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        words = tuple(sorted(set(tuple(w) for w in self.words)))
        for w in words:
            if len(w) != self.depth:
                raise ValueError(f"word {format_word(w)!r} does not have depth {self.depth}")
            if not self.system.is_valid_word(w):
                raise ValueError(f"word {w} has digits out of range for {self.system}")
        object.__setattr__(self, "words", words)

    @classmethod
    def from_ints(cls, system: OdometerSystem, depth: int, ints: Iterable[int]) -> ClopenSet:
        return cls(system, depth, tuple(system.int_to_word(k, depth) for k in ints))

    @cached_property
    def ints(self) -> frozenset[int]:
        """Mixed-radix codes of the stored words."""
        return frozenset(self.system.word_to_int(w) for w in self.words)

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self) -> Iterator[Word]:
        return iter(self.words)

    def is_empty(self) -> bool:
        return not self.words

    def is_whole(self) -> bool:
        return len(self.words) == self.system.denominator(self.depth)

    def refine(self, depth: int) -> ClopenSet:
        return refine(self, depth)

    @cached_property
    def _canonical(self) -> ClopenSet:
        words = list(self.words)
        depth = self.depth
        if not words:
            return ClopenSet(self.system, 0, ())
        while depth > 0:
            b = self.system.base(depth - 1)
            groups: dict[Word, int] = {}
            for w in words:
                groups[w[:-1]] = groups.get(w[:-1], 0) + 1
            if any(c != b for c in groups.values()):
                break
            words = sorted(groups)
            depth -= 1
        if depth == self.depth:
            return self
        return ClopenSet(self.system, depth, tuple(words))

    def canonical(self) -> ClopenSet:
        return self._canonical

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClopenSet):
            return NotImplemented
        if self.system != other.system:
            return False
        a, b = self.canonical(), other.canonical()
        return a.depth == b.depth and a.words == b.words

    def __hash__(self) -> int:
        c = self.canonical()
        return hash((self.system, c.depth, c.words))

    def __or__(self, other: ClopenSet) -> ClopenSet:
        return union(self, other)

    def __and__(self, other: ClopenSet) -> ClopenSet:
        return intersection(self, other)

    def __sub__(self, other: ClopenSet) -> ClopenSet:
        return difference(self, other)

    def __invert__(self) -> ClopenSet:
        return complement(self)

    def issubset(self, other: ClopenSet) -> bool:
        return difference(self, other).is_empty()

    def isdisjoint(self, other: ClopenSet) -> bool:
        return intersection(self, other).is_empty()

    def contains_word(self, word: Sequence[int]) -> bool:
        """Whether the cylinder of ``word`` lies inside the set."""
        return self.system.cylinder(word).issubset(self)

    def __contains__(self, point: object) -> bool:
        if isinstance(point, Point):
            c = self.canonical()
            return point.prefix(c.depth) in set(c.words)
        if isinstance(point, tuple):
            return self.contains_word(point)
        return False

    def format(self) -> str:
        return format_clopen(self)

    def __str__(self) -> str:
        return format_clopen(self)

    def __repr__(self) -> str:
        return f"ClopenSet({self.system}, depth={self.depth}, {format_clopen(self)!r})"


@dataclass(frozen=True)
class Point:
    """The point ``T**shift`` of the sequence ``word`` followed by zeros.

    Only finitely described points are representable; this covers every
    point a finite-stage construction needs to track.
    """

    system: OdometerSystem
    word: Word
    shift: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "word", tuple(self.word))
        if not self.system.is_valid_word(self.word):
            raise ValueError(f"invalid digits in {self.word}")

    def prefix(self, n: int) -> Word:
        D = self.system.denominator(n)
        base_code = self.system.word_to_int(self.word[:n])
        return self.system.int_to_word((base_code + self.shift) % D, n)

    def shifted(self, k: int) -> Point:
        return Point(self.system, self.word, self.shift + k)

    def cylinder(self, n: int) -> ClopenSet:
        return self.system.cylinder(self.prefix(n))

    def __str__(self) -> str:
        s = format_word(self.prefix(max(len(self.word), 1))) + "..."
        return s if not self.shift else f"T^{self.shift}({format_word(self.word)}0...)"


def _check_same(a: ClopenSet, b: ClopenSet) -> None:
    if a.system != b.system:
        raise ValueError(f"clopen sets live in different systems: {a.system} vs {b.system}")


def refine(s: ClopenSet, depth: int) -> ClopenSet:
    """Represent ``s`` by all of its depth-``depth`` sub-cylinders."""
    if depth < s.depth:
        raise ValueError(f"cannot refine a depth-{s.depth} set to depth {depth}")
    if depth == s.depth:
        return s
    tails = list(itertools.product(*(range(s.system.base(i)) for i in range(s.depth, depth))))
    return ClopenSet(s.system, depth, tuple(w + t for w in s.words for t in tails))


def common_depth(*sets: ClopenSet) -> int:
    return max((s.canonical().depth for s in sets), default=0)


def _binary(a: ClopenSet, b: ClopenSet, op) -> ClopenSet:
    _check_same(a, b)
    n = max(a.canonical().depth, b.canonical().depth)
    x = refine(a.canonical(), n).ints
    y = refine(b.canonical(), n).ints
    return ClopenSet.from_ints(a.system, n, op(x, y)).canonical()


def union(a: ClopenSet, b: ClopenSet) -> ClopenSet:
    return _binary(a, b, frozenset.union)


def intersection(a: ClopenSet, b: ClopenSet) -> ClopenSet:
    return _binary(a, b, frozenset.intersection)


def difference(a: ClopenSet, b: ClopenSet) -> ClopenSet:
    return _binary(a, b, frozenset.difference)


def complement(a: ClopenSet) -> ClopenSet:
    c = a.canonical()
    everything = range(a.system.denominator(c.depth))
    return ClopenSet.from_ints(a.system, c.depth, set(everything) - c.ints).canonical()


def union_all(system: OdometerSystem, sets: Iterable[ClopenSet]) -> ClopenSet:
    sets = list(sets)
    for s in sets:
        if s.system != system:
            raise ValueError("clopen sets live in different systems")
    if not sets:
        return system.empty()
    n = max(s.canonical().depth for s in sets)
    ints: set[int] = set()
    for s in sets:
        ints |= refine(s.canonical(), n).ints
    return ClopenSet.from_ints(system, n, ints).canonical()


def apply_T(s: ClopenSet, power: int = 1) -> ClopenSet:
    """Exact image ``T**power(s)``; negative powers use the inverse odometer."""
    D = s.system.denominator(s.depth)
    return ClopenSet.from_ints(s.system, s.depth, ((k + power) % D for k in s.ints)).canonical()


def reflect(s: ClopenSet) -> ClopenSet:
    """Image under the digit reflection ``x_i -> base(i) - 1 - x_i``.

    The reflection conjugates ``T`` to ``T**-1`` and preserves the product
    measure.
    """
    sysm = s.system
    return ClopenSet(
        sysm, s.depth, tuple(tuple(sysm.base(i) - 1 - d for i, d in enumerate(w)) for w in s.words)
    ).canonical()


@dataclass(frozen=True)
class InvariantMeasure:
    """The unique ``T``-invariant product measure of an odometer."""

    system: OdometerSystem

    def measure(self, s: ClopenSet) -> Fraction:
        if s.system != self.system:
            raise ValueError("set lives in a different system")
        return Fraction(len(s.words), self.system.denominator(s.depth))

    __call__ = measure

    def of_cylinder_depth(self, n: int) -> Fraction:
        return Fraction(1, self.system.denominator(n))


def measure(m: InvariantMeasure, s: ClopenSet) -> Fraction:
    return m.measure(s)


def clopen_value_set(system: OdometerSystem, max_depth: int) -> set[Fraction]:
    """All values ``k / D(n)`` with ``n <= max_depth``."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    values: set[Fraction] = set()
    for n in range(max_depth + 1):
        D = system.denominator(n)
        values.update(Fraction(k, D) for k in range(D + 1))
    return values


def orbit_length(system: OdometerSystem, k: int, depth: int) -> int:
    """Length of the ``T**k`` orbit of the zero cylinder at ``depth``,
    found by stepping the orbit explicitly."""
    start = (0,) * depth
    w = add_to_word(system, start, k % system.denominator(depth))
    steps = 1
    while w != start:
        w = add_to_word(system, w, k % system.denominator(depth))
        steps += 1
    return steps


def is_minimal_power(system: OdometerSystem, k: int, depth: int) -> bool:
    """``T**k`` cycles through every cylinder at every depth ``<= depth``.

    Checked by enumerating the orbit; ``T**k`` acts on depth-n cylinders as
    a translation, so a single orbit of full length settles each depth.
    """
    if k < 1 or depth < 1:
        raise ValueError("need k >= 1 and depth >= 1")
    return all(orbit_length(system, k, n) == system.denominator(n) for n in range(1, depth + 1))


def small_clopen(m: InvariantMeasure, epsilon: Fraction) -> ClopenSet:
    """A nonempty cylinder of measure below ``epsilon``: the all-zero word at
    the smallest depth that works (never the whole space)."""
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if epsilon > 1:
        raise ValueError("epsilon must be at most 1")
    n = 1
    while Fraction(1, m.system.denominator(n)) >= epsilon:
        n += 1
    return m.system.cylinder((0,) * n)


def format_clopen(s: ClopenSet) -> str:
    c = s.canonical()
    if c.is_empty():
        return "empty"
    if c.depth == 0:
        return "whole"
    return ",".join(format_word(w) for w in c.words)


def parse_clopen(system: OdometerSystem, text: str) -> ClopenSet:
    """Parse ``"000,101"``, ``"whole"`` or ``"empty"``.

    Words of different lengths are allowed and denote the union of their
    cylinders.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty set literal; write 'empty' for the empty set")
    if text.lower() == "whole":
        return system.whole()
    if text.lower() in ("empty", "∅"):
        return system.empty()
    words = [parse_word(t) for t in text.split(",") if t.strip()]
    if not words:
        raise ValueError(f"no words in {text!r}")
    for w in words:
        if not system.is_valid_word(w):
            raise ValueError(f"word {format_word(w)!r} has digits out of range for {system}")
    return union_all(system, (system.cylinder(w) for w in words))


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())
