"""Linear and semilinear subsets of N^k with the effective boolean and
rational algebra used by the complementation pipeline.

Union, sum, iteration and substitution are direct constructions.
Intersection, complement, difference and quotient go through the Presburger
engine (one verified decision core); those imports are deferred to avoid a
module cycle with the engine's formula<->set bridge.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

Vec = tuple[int, ...]


class DimensionMismatch(ValueError):
    pass


def _check_dim(a: "SemilinearSet", b: "SemilinearSet") -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension {a.dim} != {b.dim}")


def vec_add(u: Vec, v: Vec) -> Vec:
    return tuple(a + b for a, b in zip(u, v))


@dataclass(frozen=True)
class LinearSet:
    """base + N-combinations of the period vectors."""

    base: Vec
    periods: frozenset[Vec]

    def __post_init__(self):
        zero = tuple(0 for _ in self.base)
        if zero in self.periods:
            object.__setattr__(self, "periods", self.periods - {zero})
        for p in self.periods:
            if len(p) != len(self.base):
                raise DimensionMismatch("period dimension differs from base")

    def member(self, v: Vec) -> bool:
        rem = tuple(a - b for a, b in zip(v, self.base))
        if any(x < 0 for x in rem):
            return False
        periods = sorted(self.periods, reverse=True)

        def search(rem: Vec, i: int) -> bool:
            if not any(rem):
                return True
            if i >= len(periods):
                return False
            p = periods[i]
            bound = min((r // c for r, c in zip(rem, p) if c > 0), default=0)
            for n in range(bound, -1, -1):
                nxt = tuple(r - n * c for r, c in zip(rem, p))
                if all(x >= 0 for x in nxt) and search(nxt, i + 1):
                    return True
            return False

        return search(rem, 0)

    def pretty(self) -> str:
        per = ",".join(str(p).replace(" ", "") for p in sorted(self.periods))
        return f"lin base={str(self.base).replace(' ', '')} periods={{{per}}}"


@dataclass(frozen=True)
class SemilinearSet:
    """Finite union of linear sets of a common dimension."""

    dim: int
    parts: tuple[LinearSet, ...]

    def __post_init__(self):
        for part in self.parts:
            if len(part.base) != self.dim:
                raise DimensionMismatch("part dimension differs from set dimension")
        dedup = tuple(sorted(set(self.parts), key=lambda l: (l.base, sorted(l.periods))))
        object.__setattr__(self, "parts", dedup)

    @staticmethod
    def empty(dim: int) -> "SemilinearSet":
        return SemilinearSet(dim, ())

    @staticmethod
    def of_vectors(dim: int, vecs) -> "SemilinearSet":
        return SemilinearSet(dim, tuple(LinearSet(tuple(v), frozenset()) for v in vecs))

    @staticmethod
    def universe(dim: int) -> "SemilinearSet":
        units = [tuple(1 if i == j else 0 for j in range(dim)) for i in range(dim)]
        return SemilinearSet(dim, (LinearSet(tuple(0 for _ in range(dim)),
                                             frozenset(units)),))

    def is_trivially_empty(self) -> bool:
        return not self.parts

    def pretty(self) -> str:
        return " ; ".join(p.pretty() for p in self.parts) if self.parts else "empty"


def sl_member(v: Vec, s: SemilinearSet) -> bool:
    if len(v) != s.dim:
        raise DimensionMismatch(f"vector dimension {len(v)} != {s.dim}")
    return any(p.member(v) for p in s.parts)


def sl_union(a: SemilinearSet, b: SemilinearSet) -> SemilinearSet:
    _check_dim(a, b)
    return SemilinearSet(a.dim, a.parts + b.parts)


def sl_sum(a: SemilinearSet, b: SemilinearSet) -> SemilinearSet:
    """Minkowski sum: the parallel product on Parikh vectors."""
    _check_dim(a, b)
    parts = tuple(LinearSet(vec_add(x.base, y.base), x.periods | y.periods)
                  for x in a.parts for y in b.parts)
    return SemilinearSet(a.dim, parts)


def sl_iter(s: SemilinearSet) -> SemilinearSet:
    """Submonoid generated by s, including the zero vector.

    Standard expansion: for each subset of parts, the sum of their bases is
    a base and the chosen bases themselves join the periods.
    """
    zero = tuple(0 for _ in range(s.dim))
    parts = []
    n = len(s.parts)
    for mask in range(1 << n):
        chosen = [s.parts[i] for i in range(n) if mask >> i & 1]
        base = zero
        periods: set[Vec] = set()
        for part in chosen:
            base = vec_add(base, part.base)
            periods.add(part.base)
            periods |= part.periods
        parts.append(LinearSet(base, frozenset(periods)))
    return SemilinearSet(s.dim, tuple(parts))


def sl_iter_plus(s: SemilinearSet) -> SemilinearSet:
    """At-least-one iteration (the zero vector only if s already has it)."""
    return sl_sum(s, sl_iter(s))


def sl_substitute(s: SemilinearSet, h: dict[int, list[Vec]], out_dim: int) -> SemilinearSet:
    """Non-uniform substitution of coordinate units by finite vector sets.

    Each occurrence of the i-th unit is independently replaced by a member
    of h[i].  Bases expand by enumerating distributions; a period expands
    into the Minkowski combinations of its unit occurrences.
    """
    out_parts: list[LinearSet] = []
    for part in s.parts:
        for i, cnt in enumerate(part.base):
            if cnt and i not in h:
                raise KeyError(f"no substitution entry for coordinate {i}")
        for p in part.periods:
            for i, cnt in enumerate(p):
                if cnt and i not in h:
                    raise KeyError(f"no substitution entry for coordinate {i}")
        # enumerate base images
        images = {tuple(0 for _ in range(out_dim))}
        for i, cnt in enumerate(part.base):
            for _ in range(cnt):
                images = {vec_add(img, w) for img in images for w in h[i]}
        # enumerate the image set of a single period instance
        new_periods: set[Vec] = set()
        for p in part.periods:
            pimgs = {tuple(0 for _ in range(out_dim))}
            for i, cnt in enumerate(p):
                for _ in range(cnt):
                    pimgs = {vec_add(img, w) for img in pimgs for w in h[i]}
            new_periods |= pimgs
        for img in sorted(images):
            out_parts.append(LinearSet(img, frozenset(new_periods)))
    return SemilinearSet(out_dim, tuple(out_parts))


# --- operations routed through the Presburger engine ------------------------


def sl_intersect(a: SemilinearSet, b: SemilinearSet) -> SemilinearSet:
    from . import presburger as pb
    _check_dim(a, b)
    if a.is_trivially_empty() or b.is_trivially_empty():
        return SemilinearSet.empty(a.dim)
    return pb.combine_to_sl([a, b], lambda fs: pb.conj(fs))


def sl_complement(s: SemilinearSet) -> SemilinearSet:
    from . import presburger as pb
    return pb.combine_to_sl([s], lambda fs: pb.neg(fs[0]))


def sl_difference(a: SemilinearSet, b: SemilinearSet) -> SemilinearSet:
    from . import presburger as pb
    _check_dim(a, b)
    if a.is_trivially_empty():
        return SemilinearSet.empty(a.dim)
    if b.is_trivially_empty():
        return a
    return pb.combine_to_sl([a, b], lambda fs: pb.conj([fs[0], pb.neg(fs[1])]))


def sl_is_empty(s: SemilinearSet) -> bool:
    # a semilinear set in base/period form is empty iff it has no parts
    return not s.parts


def sl_equal(a: SemilinearSet, b: SemilinearSet) -> bool:
    """Semantic equality: both differences empty."""
    _check_dim(a, b)
    if a.parts == b.parts:
        return True
    return sl_is_empty(sl_difference(a, b)) and sl_is_empty(sl_difference(b, a))


def sl_quotient(y: SemilinearSet, x: SemilinearSet) -> SemilinearSet:
    """{ z : exists v in x with z + v in y }."""
    from . import presburger as pb
    _check_dim(y, x)
    return pb.quotient_to_sl(y, x)


def sl_simplify(s: SemilinearSet) -> SemilinearSet:
    """Drop parts subsumed by another part (same-or-fewer periods and a
    reachable base); representation-level only, the denotation is unchanged."""
    order = sorted(s.parts, key=lambda l: (-len(l.periods), sum(l.base), l.base))
    out: list[LinearSet] = []
    for part in order:
        if any(part.periods <= k.periods and k.member(part.base) for k in out):
            continue
        out.append(part)
    return SemilinearSet(s.dim, tuple(out))


def sl_compact(s: SemilinearSet) -> SemilinearSet:
    """Try to shrink the representation by re-extracting from the cached
    quantifier-free description; keeps whichever form has fewer parts."""
    from . import presburger as pb
    if len(s.parts) <= 2:
        return s
    qf = pb.sl_to_qf(s)
    s2 = pb.formula_to_sl(qf, tuple(f"x{i}" for i in range(s.dim)))
    return s2 if len(s2.parts) < len(s.parts) else s


def sl_disjointify(s: SemilinearSet, max_parts: int = 200) -> SemilinearSet:
    """Rewrite s as a union of pairwise disjoint linear parts.

    Greedy re-extraction: each new part is carved out of the set minus all
    previously kept parts at the formula level, so disjointness holds by
    construction; the loop is capped and the result verified.
    """
    from . import presburger as pb
    kept: list[LinearSet] = []
    remaining = s
    while not sl_is_empty(remaining):
        if len(kept) > max_parts:
            raise RuntimeError("disjointification did not converge")
        part = remaining.parts[0]
        kept.append(part)
        remaining = sl_difference(remaining,
                                  SemilinearSet(s.dim, (part,)))
    return SemilinearSet(s.dim, tuple(kept))
