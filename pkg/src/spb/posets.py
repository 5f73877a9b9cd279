"""Finite labeled posets, series-parallel decomposition, blocks and witnesses.

Element ids are dense integers assigned by left-to-right traversal of the
originating term, so golden values are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

from .terms import Letter, Par, Seq, SpTerm, par, seq


class NotNFree(ValueError):
    def __init__(self, witness: tuple[int, int, int, int]):
        self.witness = witness
        super().__init__(f"poset contains an N on elements {witness}")


@dataclass(frozen=True)
class LabeledPoset:
    """Strict partial order over elements 0..n-1 with a letter per element."""

    labels: tuple[str, ...]
    order: frozenset[tuple[int, int]]

    def __post_init__(self):
        n = len(self.labels)
        for (x, y) in self.order:
            if not (0 <= x < n and 0 <= y < n):
                raise ValueError(f"order pair {(x, y)} out of range")
            if x == y:
                raise ValueError(f"order is not irreflexive at {x}")
        for (x, y) in self.order:
            for (y2, z) in self.order:
                if y2 == y and (x, z) not in self.order:
                    raise ValueError(f"order is not transitive: {(x, y)}, {(y, z)}")

    @property
    def n(self) -> int:
        return len(self.labels)

    def less(self, x: int, y: int) -> bool:
        return (x, y) in self.order

    def comparable(self, x: int, y: int) -> bool:
        return x != y and ((x, y) in self.order or (y, x) in self.order)

    @cached_property
    def _down(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(x for x in range(self.n) if (x, y) in self.order)
                     for y in range(self.n))

    def covers(self, x: int, y: int) -> bool:
        """x is an immediate predecessor of y."""
        if (x, y) not in self.order:
            return False
        return not any((x, z) in self.order and (z, y) in self.order for z in range(self.n))

    def predecessors(self, y: int) -> frozenset[int]:
        return frozenset(x for x in range(self.n) if self.covers(x, y))

    def successors(self, x: int) -> frozenset[int]:
        return frozenset(y for y in range(self.n) if self.covers(x, y))

    def minima(self, subset: frozenset[int]) -> frozenset[int]:
        return frozenset(x for x in subset
                         if not any(y in subset and (y, x) in self.order for y in subset))

    def maxima(self, subset: frozenset[int]) -> frozenset[int]:
        return frozenset(x for x in subset
                         if not any(y in subset and (x, y) in self.order for y in subset))


def term_to_poset(t: SpTerm) -> LabeledPoset:
    labels: list[str] = []
    order: set[tuple[int, int]] = set()

    def walk(u: SpTerm) -> tuple[int, int]:
        """Place u, returning the (start, end) id range it occupies."""
        if isinstance(u, Letter):
            labels.append(u.symbol)
            return (len(labels) - 1, len(labels))
        ranges = [walk(c) for c in u.children]
        if isinstance(u, Seq):
            for i in range(len(ranges)):
                for j in range(i + 1, len(ranges)):
                    for x in range(ranges[i][0], ranges[i][1]):
                        for y in range(ranges[j][0], ranges[j][1]):
                            order.add((x, y))
        return (ranges[0][0], ranges[-1][1])

    walk(t)
    return LabeledPoset(tuple(labels), frozenset(order))


def find_n_witness(p: LabeledPoset) -> tuple[int, int, int, int] | None:
    """Four elements whose induced order is exactly x1<x2, x3<x2, x3<x4."""
    lt = p.order
    for x1 in range(p.n):
        for x2 in range(p.n):
            if (x1, x2) not in lt:
                continue
            for x3 in range(p.n):
                if x3 in (x1, x2) or (x3, x2) not in lt or p.comparable(x1, x3):
                    continue
                for x4 in range(p.n):
                    if x4 in (x1, x2, x3) or (x3, x4) not in lt:
                        continue
                    if p.comparable(x1, x4) or p.comparable(x2, x4):
                        continue
                    return (x1, x2, x3, x4)
    return None


def poset_to_term(p: LabeledPoset) -> SpTerm:
    """Series-parallel decomposition; raises NotNFree with a witness."""
    if p.n == 0:
        raise ValueError("empty poset has no term")

    def decompose(elems: list[int]) -> SpTerm:
        if len(elems) == 1:
            return Letter(p.labels[elems[0]])
        # parallel split: components of the comparability graph
        comps: list[list[int]] = []
        seen: set[int] = set()
        for e in elems:
            if e in seen:
                continue
            comp = {e}
            stack = [e]
            while stack:
                x = stack.pop()
                for y in elems:
                    if y not in comp and p.comparable(x, y):
                        comp.add(y)
                        stack.append(y)
            seen |= comp
            comps.append(sorted(comp))
        if len(comps) > 1:
            return par(*(decompose(c) for c in comps))
        # sequential split: cuts S with S < complement pointwise
        elems_set = set(elems)
        cuts: list[set[int]] = []
        by_down = sorted(elems, key=lambda e: len(p._down[e] & elems_set))
        prefix: set[int] = set()
        for e in by_down[:-1]:
            prefix = prefix | {e}
            if all((x, y) in p.order for x in prefix for y in elems_set - prefix):
                cuts.append(set(prefix))
        if not cuts:
            w = find_n_witness(p)
            assert w is not None, "connected, cut-free, >1 element poset must contain an N"
            raise NotNFree(w)
        factors: list[SpTerm] = []
        prev: set[int] = set()
        for cut in cuts:
            factors.append(decompose(sorted(cut - prev)))
            prev = cut
        factors.append(decompose(sorted(elems_set - prev)))
        return seq(*factors)

    return decompose(list(range(p.n)))


# --- blocks (the structural subsets used by the logic) -----------------------


def is_block(p: LabeledPoset, r: frozenset[int], x: frozenset[int]) -> bool:
    if not r or not r <= x:
        return False
    return all(e in r
               for a in r for b in r for e in x
               if (a, e) in p.order and (e, b) in p.order)


def is_good_block(p: LabeledPoset, r: frozenset[int], x: frozenset[int]) -> bool:
    if not is_block(p, r, x):
        return False
    for e in x - r:
        comp = [p.comparable(e, a) for a in r]
        if any(comp) and not all(comp):
            return False
    return True


def is_connected_block(p: LabeledPoset, c: frozenset[int], x: frozenset[int]) -> bool:
    if not is_block(p, c, x):
        return False
    for a, b in combinations(c, 2):
        if p.comparable(a, b):
            continue
        if not any((p.less(a, e) and p.less(b, e)) or (p.less(e, a) and p.less(e, b))
                   for e in c):
            return False
    return True


def _is_parallel_subset(p: LabeledPoset, r: frozenset[int]) -> bool:
    """r decomposes as a parallel product of two nonempty parts."""
    if len(r) < 2:
        return False
    start = next(iter(r))
    comp = {start}
    stack = [start]
    while stack:
        a = stack.pop()
        for b in r:
            if b not in comp and p.comparable(a, b):
                comp.add(b)
                stack.append(b)
    return comp != r


def parallel_components(p: LabeledPoset, r: frozenset[int]) -> list[frozenset[int]]:
    """Maximal parallel components (comparability components) of r."""
    comps: list[frozenset[int]] = []
    left = set(r)
    while left:
        e = min(left)
        comp = {e}
        stack = [e]
        while stack:
            a = stack.pop()
            for b in r:
                if b not in comp and p.comparable(a, b):
                    comp.add(b)
                    stack.append(b)
        comps.append(frozenset(comp))
        left -= comp
    return sorted(comps, key=min)


def is_gmpb(p: LabeledPoset, r: frozenset[int], x: frozenset[int]) -> bool:
    """r is a good maximal parallel block of x."""
    if not (is_good_block(p, r, x) and _is_parallel_subset(p, r)):
        return False
    rest = [e for e in x - r if all(not p.comparable(e, a) for a in r)]
    for k in range(1, len(rest) + 1):
        for extra in combinations(rest, k):
            r2 = r | frozenset(extra)
            if is_good_block(p, r2, x):
                return False
    return True


def good_maximal_parallel_blocks(p: LabeledPoset, x: frozenset[int]) -> list[frozenset[int]]:
    """All good maximal parallel blocks of x, brute-forced over subsets."""
    if not x <= frozenset(range(p.n)):
        raise ValueError("x is not a subset of the poset's elements")
    elems = sorted(x)
    good_parallel: list[frozenset[int]] = []
    for k in range(2, len(elems) + 1):
        for sub in combinations(elems, k):
            r = frozenset(sub)
            if _is_parallel_subset(p, r) and is_good_block(p, r, x):
                good_parallel.append(r)
    out = []
    for r in good_parallel:
        maximal = True
        for r2 in good_parallel:
            if r < r2 and all(not p.comparable(a, b) for a in r for b in r2 - r):
                maximal = False
                break
        if maximal:
            out.append(r)
    return sorted(out, key=lambda s: (min(s), len(s)))


def witnesses(p: LabeledPoset, g: frozenset[int]) -> tuple[frozenset[int], frozenset[int]]:
    """(left, right) witnesses of a good maximal parallel block g.

    Computed from the predecessor/successor characterization, then filtered
    by the definitional side conditions; the agreement of the two routes is
    a test, not an assumption.
    """
    ming, maxg = p.minima(g), p.maxima(g)
    w_minus = frozenset(x for m in ming for x in range(p.n) if p.covers(x, m))
    w_plus = frozenset(y for m in maxg for y in range(p.n) if p.covers(m, y))
    left = frozenset(w for w in w_minus if p.successors(w) == ming)
    right = frozenset(w for w in w_plus if p.predecessors(w) == maxg)
    return left, right


def witnesses_by_definition(p: LabeledPoset, g: frozenset[int]) -> tuple[frozenset[int], frozenset[int]]:
    """Witnesses straight from the first-order definition (test oracle)."""
    below = [x for x in range(p.n) if x not in g and all(p.less(x, e) for e in g)]
    above = [x for x in range(p.n) if x not in g and all(p.less(e, x) for e in g)]
    incomp = [y for y in range(p.n) if y not in g and all(not p.comparable(y, e) for e in g)]
    max_below = [x for x in below if not any(p.less(x, z) for z in below)]
    min_above = [x for x in above if not any(p.less(z, x) for z in above)]
    left = frozenset(x for x in max_below if not any(p.less(x, y) for y in incomp))
    right = frozenset(x for x in min_above if not any(p.less(y, x) for y in incomp))
    return left, right
