"""Security lattices, label intervals, gradual labels and evidence.

Labels are interned as small integers indexing into the lattice tables.
The unknown gradual label ``?`` is represented by :data:`DYN`.  Every
operation that can be undefined returns ``None`` instead of raising, so
callers decide whether an absent result is an abort or a rejection.
"""
from __future__ import annotations

from typing import Iterable, NamedTuple, Optional, Sequence

DYN = -1

Label = int
GLabel = int


class LatticeError(Exception):
    pass


class NotALattice(LatticeError):
    pass


class NoBoundedEnds(LatticeError):
    pass


class InvalidInterval(ValueError):
    pass


class Interval(NamedTuple):
    lo: Label
    hi: Label


class Evidence(NamedTuple):
    left: Interval
    right: Interval


class Lattice:
    """A finite bounded lattice with precomputed order, join and meet tables."""

    def __init__(self, names: Sequence[str], order: list[list[bool]]):
        self.names = tuple(names)
        self.index = {n: i for i, n in enumerate(self.names)}
        n = len(self.names)
        self._leq = order
        self._join = [[0] * n for _ in range(n)]
        self._meet = [[0] * n for _ in range(n)]
        for a in range(n):
            for b in range(n):
                j = self._least(c for c in range(n) if order[a][c] and order[b][c])
                m = self._greatest(c for c in range(n) if order[c][a] and order[c][b])
                if j is None:
                    raise NotALattice(f"{self.names[a]} and {self.names[b]} have no unique join")
                if m is None:
                    raise NotALattice(f"{self.names[a]} and {self.names[b]} have no unique meet")
                self._join[a][b] = j
                self._meet[a][b] = m
        bot = self._least(range(n))
        top = self._greatest(range(n))
        if bot is None or top is None:
            raise NoBoundedEnds("lattice needs a least and a greatest element")
        self.bot: Label = bot
        self.top: Label = top

    def _least(self, items: Iterable[int]) -> Optional[int]:
        cands = list(items)
        for c in cands:
            if all(self._leq[c][d] for d in cands):
                return c
        return None

    def _greatest(self, items: Iterable[int]) -> Optional[int]:
        cands = list(items)
        for c in cands:
            if all(self._leq[d][c] for d in cands):
                return c
        return None

    def __repr__(self) -> str:
        return f"Lattice({', '.join(self.names)})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Lattice) and self.names == other.names and self._leq == other._leq

    def __hash__(self) -> int:
        return hash(self.names)

    @property
    def labels(self) -> range:
        return range(len(self.names))

    def label(self, name: str) -> Label:
        try:
            return self.index[name]
        except KeyError:
            raise KeyError(f"unknown label {name!r}") from None

    def glabel(self, name: str) -> GLabel:
        return DYN if name == "?" else self.label(name)

    def name(self, l: Label) -> str:
        return self.names[l]

    def gname(self, g: GLabel) -> str:
        return "?" if g == DYN else self.names[g]

    def iname(self, iv: Interval) -> str:
        return f"[{self.names[iv.lo]},{self.names[iv.hi]}]"

    # order

    def leq(self, a: Label, b: Label) -> bool:
        return self._leq[a][b]

    def join(self, a: Label, b: Label) -> Label:
        return self._join[a][b]

    def meet(self, a: Label, b: Label) -> Label:
        return self._meet[a][b]

    # intervals

    def valid(self, iv: Interval) -> bool:
        return self._leq[iv.lo][iv.hi]

    def interval(self, lo: Label, hi: Label) -> Interval:
        iv = Interval(lo, hi)
        if not self.valid(iv):
            raise InvalidInterval(f"[{self.names[lo]},{self.names[hi]}] is not a valid interval")
        return iv

    def point(self, l: Label) -> Interval:
        return Interval(l, l)

    def all_intervals(self) -> list[Interval]:
        return [Interval(a, b) for a in self.labels for b in self.labels if self._leq[a][b]]

    def gamma(self, g: GLabel) -> Interval:
        if g == DYN:
            return Interval(self.bot, self.top)
        return Interval(g, g)

    def precision(self, i1: Interval, i2: Interval) -> bool:
        """``i1 ⊑ i2``: i1's bounds lie inside i2."""
        return self._leq[i2.lo][i1.lo] and self._leq[i1.hi][i2.hi]

    def interval_leq(self, i1: Interval, i2: Interval) -> bool:
        return self._leq[i1.hi][i2.lo]

    def refine(self, i1: Interval, i2: Interval) -> Optional[tuple[Interval, Interval]]:
        r1 = Interval(i1.lo, self._meet[i1.hi][i2.hi])
        r2 = Interval(self._join[i2.lo][i1.lo], i2.hi)
        if self.valid(r1) and self.valid(r2):
            return r1, r2
        return None

    def ijoin(self, i1: Interval, i2: Interval) -> Interval:
        return Interval(self._join[i1.lo][i2.lo], self._join[i1.hi][i2.hi])

    def intersect(self, i1: Interval, i2: Interval) -> Optional[Interval]:
        r = Interval(self._join[i1.lo][i2.lo], self._meet[i1.hi][i2.hi])
        return r if self.valid(r) else None

    def apply_evidence(self, iv: Interval, ev: Evidence) -> Optional[Interval]:
        mid = self.intersect(ev.left, iv)
        if mid is None:
            return None
        r = self.refine(mid, ev.right)
        return None if r is None else r[1]

    def restrict_lb(self, old: Interval, new: Interval) -> Optional[Interval]:
        r = Interval(self._join[old.lo][new.lo], old.hi)
        return r if self.valid(r) else None

    # gradual labels

    def cleq(self, g1: GLabel, g2: GLabel) -> bool:
        if g1 == DYN or g2 == DYN:
            return True
        return self._leq[g1][g2]

    def cjoin(self, g1: GLabel, g2: GLabel) -> GLabel:
        if g1 != DYN and g2 != DYN:
            return self._join[g1][g2]
        if g1 == self.top or g2 == self.top:
            return self.top
        return DYN

    def gprec(self, g1: GLabel, g2: GLabel) -> bool:
        """``g1 ⊑ g2`` on gradual labels."""
        return g2 == DYN or g1 == g2

    def all_glabels(self) -> list[GLabel]:
        return [DYN, *self.labels]


def build_lattice(
    labels: Iterable[str],
    covers: Iterable[tuple[str, str]],
    bot: Optional[str] = None,
    top: Optional[str] = None,
) -> Lattice:
    """Build a lattice from label names and ``(lower, upper)`` cover pairs."""
    names = sorted(labels) if isinstance(labels, (set, frozenset)) else list(dict.fromkeys(labels))
    if not names:
        raise NoBoundedEnds("empty label set")
    idx = {n: i for i, n in enumerate(names)}
    n = len(names)
    order = [[i == j for j in range(n)] for i in range(n)]
    for a, b in covers:
        if a not in idx or b not in idx:
            raise NotALattice(f"cover {a} < {b} mentions an undeclared label")
        order[idx[a]][idx[b]] = True
    for k in range(n):
        for i in range(n):
            if order[i][k]:
                row_k = order[k]
                row_i = order[i]
                for j in range(n):
                    if row_k[j]:
                        row_i[j] = True
    for i in range(n):
        for j in range(i + 1, n):
            if order[i][j] and order[j][i]:
                raise NotALattice(f"cyclic order between {names[i]} and {names[j]}")
    lat = Lattice(names, order)
    if bot is not None and lat.name(lat.bot) != bot:
        raise NoBoundedEnds(f"declared bottom {bot} is not the least element")
    if top is not None and lat.name(lat.top) != top:
        raise NoBoundedEnds(f"declared top {top} is not the greatest element")
    return lat


def chain(*names: str) -> Lattice:
    return build_lattice(list(names), list(zip(names, names[1:])))


def two_point() -> Lattice:
    return chain("L", "H")


def four_point() -> Lattice:
    return chain("bot", "L", "H", "top")


def diamond() -> Lattice:
    return build_lattice(
        ["bot", "A", "B", "top"],
        [("bot", "A"), ("bot", "B"), ("A", "top"), ("B", "top")],
    )
