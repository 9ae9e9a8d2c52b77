"""Brute-force reference implementations used as test oracles.

Intervals are read as the finite sets of labels they contain, with the
order rebuilt from cover pairs by graph search, so nothing here shares
code with the lattice tables under test.
"""
from __future__ import annotations

from itertools import product
from typing import Optional


class SetLattice:
    def __init__(self, names: list[str], covers: list[tuple[str, str]]):
        self.names = list(names)
        up = {n: {n} for n in names}
        changed = True
        while changed:
            changed = False
            for a, b in covers:
                for n in names:
                    if a in up[n] and b not in up[n]:
                        up[n].add(b)
                        changed = True
        self.up = up

    def leq(self, a: str, b: str) -> bool:
        return b in self.up[a]

    def members(self, lo: str, hi: str) -> frozenset:
        return frozenset(n for n in self.names if self.leq(lo, n) and self.leq(n, hi))

    def intervals(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b in product(self.names, repeat=2) if self.leq(a, b)]

    def least(self, s) -> Optional[str]:
        for c in s:
            if all(self.leq(c, d) for d in s):
                return c
        return None

    def greatest(self, s) -> Optional[str]:
        for c in s:
            if all(self.leq(d, c) for d in s):
                return c
        return None

    def join(self, a: str, b: str) -> str:
        return self.least([c for c in self.names if self.leq(a, c) and self.leq(b, c)])

    def as_interval(self, s) -> Optional[tuple[str, str]]:
        """The interval whose member set is exactly ``s``; None for the empty set."""
        if not s:
            return None
        lo, hi = self.least(s), self.greatest(s)
        assert lo is not None and hi is not None, f"{sorted(s)} has no bounds"
        assert self.members(lo, hi) == frozenset(s), f"{sorted(s)} is not convex"
        return lo, hi

    def hull(self, s) -> tuple[str, str]:
        lo, hi = self.least(s), self.greatest(s)
        assert lo is not None and hi is not None
        return lo, hi

    # operations on intervals as label sets

    def refine(self, i1, i2):
        s1, s2 = self.members(*i1), self.members(*i2)
        left = {a for a in s1 if any(self.leq(a, b) for b in s2)}
        right = {b for b in s2 if any(self.leq(a, b) for a in s1)}
        if not left or not right:
            return None
        return self.as_interval(left), self.as_interval(right)

    def ijoin(self, i1, i2):
        s = {self.join(a, b) for a in self.members(*i1) for b in self.members(*i2)}
        return self.hull(s)

    def intersect(self, i1, i2):
        return self.as_interval(self.members(*i1) & self.members(*i2))

    def restrict_lb(self, old, new):
        s = {a for a in self.members(*old) if any(self.leq(b, a) for b in self.members(*new))}
        return self.as_interval(s)

    def apply_evidence(self, iv, ev):
        mid = self.intersect(ev[0], iv)
        if mid is None:
            return None
        r = self.refine(mid, ev[1])
        return None if r is None else r[1]


FOUR = SetLattice(["bot", "L", "H", "top"], [("bot", "L"), ("L", "H"), ("H", "top")])
DIAMOND = SetLattice(["bot", "A", "B", "top"], [("bot", "A"), ("bot", "B"), ("A", "top"), ("B", "top")])
