"""Parikh images of commutative context-free grammars.

A derivation is abstracted by its multiset of production applications: such
a multiset derives from the start symbol exactly when it balances the
generation/expansion flow of every nonterminal and its support is connected
to the start.  Supports are enumerated as connected production subsets; the
flow solutions of each support form a linear set computed by a Hilbert
basis, and the terminal image is taken linearly.  Results are always
cross-checked by bounded enumeration in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .hilbert import solve_system
from .semilinear import LinearSet, SemilinearSet


@dataclass(frozen=True)
class Grammar:
    """Commutative grammar: productions map a nonterminal to a multiset of
    nonterminals and terminals (encoded as a sorted tuple of symbols)."""

    nonterminals: tuple
    terminals: tuple
    productions: tuple  # of (lhs, rhs tuple)
    start: object

    def __post_init__(self):
        nts = set(self.nonterminals)
        ts = set(self.terminals)
        if self.start not in nts:
            raise ValueError("start symbol is not a nonterminal")
        for lhs, rhs in self.productions:
            if lhs not in nts:
                raise ValueError(f"unknown lhs {lhs!r}")
            for s in rhs:
                if s not in nts and s not in ts:
                    raise ValueError(f"unknown symbol {s!r}")


def _connected_supports(g: Grammar, cap: int = 200_000):
    """Yield the production index sets whose support graph is connected to
    the start symbol (every chosen production's lhs is derivable)."""
    by_lhs: dict = {}
    for i, (lhs, _rhs) in enumerate(g.productions):
        by_lhs.setdefault(lhs, []).append(i)
    nts = set(g.nonterminals)
    count = 0

    def addable(chosen: frozenset, reach: frozenset) -> list[int]:
        return [i for i in range(len(g.productions))
                if i not in chosen and g.productions[i][0] in reach]

    def grow(chosen: frozenset, reach: frozenset, banned: frozenset):
        nonlocal count
        if chosen:
            count += 1
            if count > cap:
                raise RuntimeError("support enumeration exceeded cap")
            yield chosen
        for i in addable(chosen, reach):
            if i in banned:
                continue
            rhs_nts = frozenset(s for s in g.productions[i][1] if s in nts)
            yield from grow(chosen | {i}, reach | rhs_nts, banned)
            banned = banned | {i}

    yield from grow(frozenset(), frozenset({g.start}), frozenset())


def parikh_semilinear(g: Grammar) -> SemilinearSet:
    """The Parikh image of the grammar over its terminal order."""
    t_ix = {t: i for i, t in enumerate(g.terminals)}
    nt_ix = {n: i for i, n in enumerate(g.nonterminals)}
    nts = set(g.nonterminals)
    dim = len(g.terminals)

    def term_image(y: tuple[int, ...], prods: list[int]) -> tuple[int, ...]:
        img = [0] * dim
        for cnt, pi in zip(y, prods):
            if not cnt:
                continue
            for s in g.productions[pi][1]:
                if s in t_ix:
                    img[t_ix[s]] += cnt
        return tuple(img)

    parts: list[LinearSet] = []
    seen_supports = set()
    for chosen in _connected_supports(g):
        if chosen in seen_supports:
            continue
        seen_supports.add(chosen)
        prods = sorted(chosen)
        used_nts = {g.start} | {g.productions[i][0] for i in prods} | \
            {s for i in prods for s in g.productions[i][1] if s in nts}
        # flow equation per used nonterminal:
        #   expansions(B) - generated-occurrences(B) = [B = start]
        rows, rhs = [], []
        for b in sorted(used_nts, key=lambda n: nt_ix[n]):
            row = []
            for i in prods:
                lhs, rhsyms = g.productions[i]
                c = (1 if lhs == b else 0) - sum(1 for s in rhsyms if s == b)
                row.append(c)
            rows.append(row)
            rhs.append(1 if b == g.start else 0)
        # every chosen production fires at least once: y = 1 + u
        shift_rhs = [r - sum(row) for row, r in zip(rows, rhs)]
        bases, periods = solve_system(rows, shift_rhs, len(prods))
        if not bases:
            continue
        period_imgs = frozenset(
            img for img in (term_image(p, prods) for p in periods) if any(img))
        for b in bases:
            y = tuple(u + 1 for u in b)
            parts.append(LinearSet(term_image(y, prods), period_imgs))
    return SemilinearSet(dim, tuple(parts))
