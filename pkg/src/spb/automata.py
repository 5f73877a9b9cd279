"""Branching automata: sequential transitions plus fork and join transitions
over state multisets.

Membership follows the saturated pair-multiset characterization of parallel
paths: a parallel poset with n irreducible components labels a path from p
to q exactly when some saturated multiset of n state pairs admits a perfect
matching against the components.  An independent path-search oracle
(membership_oracle) recurses over all decompositions instead and is used to
cross-check.

Fork/join transitions may carry links: a linked fork can only be closed by
one of its linked joins.  Links are an internal gadget device (plain
automata have none); linked_to_plain in the complement module removes them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

from .terms import Letter, Par, Seq, SpTerm, enumerate_terms, letters_of

Pair = tuple[str, str]
Multiset = tuple[Pair, ...]  # sorted tuple


class AutomatonError(ValueError):
    pass


@dataclass(frozen=True)
class BranchingAutomaton:
    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    seq: frozenset[tuple[str, str, str]]
    forks: tuple[tuple[str, tuple[str, ...]], ...]
    joins: tuple[tuple[tuple[str, ...], str], ...]
    initial: frozenset[str]
    final: frozenset[str]
    links: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        st = set(self.states)
        for (p, a, q) in self.seq:
            if p not in st or q not in st:
                raise AutomatonError(f"sequential transition {(p, a, q)} uses unknown state")
            if a not in self.alphabet:
                raise AutomatonError(f"unknown letter {a!r}")
        for origin, branches in self.forks:
            if len(branches) < 2:
                raise AutomatonError("fork arity must be >= 2")
            if origin not in st or any(b not in st for b in branches):
                raise AutomatonError("fork uses unknown state")
            if tuple(sorted(branches)) != branches:
                raise AutomatonError("fork branches must be sorted")
        for branches, target in self.joins:
            if len(branches) < 2:
                raise AutomatonError("join arity must be >= 2")
            if target not in st or any(b not in st for b in branches):
                raise AutomatonError("join uses unknown state")
            if tuple(sorted(branches)) != branches:
                raise AutomatonError("join branches must be sorted")
        for (fi, ji) in self.links:
            if not (0 <= fi < len(self.forks) and 0 <= ji < len(self.joins)):
                raise AutomatonError(f"link {(fi, ji)} references unknown transition")
        if not (self.initial <= st and self.final <= st):
            raise AutomatonError("initial/final not a subset of states")

    def pretty(self) -> str:
        lines = [f"states: {', '.join(self.states)}",
                 f"initial: {sorted(self.initial)}  final: {sorted(self.final)}"]
        for (p, a, q) in sorted(self.seq):
            lines.append(f"  {p} --{a}--> {q}")
        for i, (o, br) in enumerate(self.forks):
            lines.append(f"  fork#{i} {o} -> {{{', '.join(br)}}}")
        for i, (br, t) in enumerate(self.joins):
            lines.append(f"  join#{i} {{{', '.join(br)}}} -> {t}")
        if self.links:
            lines.append(f"  links: {sorted(self.links)}")
        return "\n".join(lines)


def make_automaton(states, alphabet, seq, forks, joins, initial, final,
                   links=()) -> BranchingAutomaton:
    """Convenience constructor that sorts multisets and normalizes types."""
    return BranchingAutomaton(
        states=tuple(states),
        alphabet=tuple(sorted(set(alphabet))),
        seq=frozenset((p, a, q) for (p, a, q) in seq),
        forks=tuple((o, tuple(sorted(br))) for (o, br) in forks),
        joins=tuple((tuple(sorted(br)), t) for (br, t) in joins),
        initial=frozenset(initial),
        final=frozenset(final),
        links=frozenset(links),
    )


# --- cached per-automaton analysis -------------------------------------------


class _Analysis:
    def __init__(self, a: BranchingAutomaton):
        self.a = a
        self.linked_forks = {fi for (fi, _) in a.links}
        self.linked_joins = {ji for (_, ji) in a.links}
        by_fork: dict[int, list[int]] = {}
        for (fi, ji) in a.links:
            by_fork.setdefault(fi, []).append(ji)
        unlinked_joins = [ji for ji in range(len(a.joins))
                          if ji not in self.linked_joins]
        self.compat: dict[int, list[int]] = {}
        for fi in range(len(a.forks)):
            if fi in self.linked_forks:
                self.compat[fi] = sorted(by_fork[fi])
            else:
                self.compat[fi] = unlinked_joins
        self._detect_hub()
        self.reach = self._reachable_pairs()
        self.k: dict[Pair, tuple[Multiset, ...]] = {}
        self._k_all()
        self.par_pairs = frozenset(pq for pq, ks in self.k.items() if ks)
        self.f_levels: dict[Pair, dict[int, frozenset[Multiset]]] = {}
        self.reach_memo: dict = {}
        self.oracle_memo: dict = {}
        self.hub_w_memo: dict = {}
        self.canpar_memo: dict = {}
        # slot bookkeeping for the parallel-reachability recursion
        self.pair_ix = {pq: i for i, pq in enumerate(sorted(self.reach))}
        self.rec_mask = 0
        for pq in self.par_pairs:
            self.rec_mask |= 1 << self.pair_ix[pq]
        self.k_flat: list[tuple[Pair, Multiset, int]] = []
        for pq in sorted(self.par_pairs):
            for m in self.k[pq]:
                mask = 0
                for e in m:
                    mask |= 1 << self.pair_ix[e]
                self.k_flat.append((pq, m, mask))

    def links_ok(self, fi: int, ji: int) -> bool:
        if fi in self.linked_forks or ji in self.linked_joins:
            return (fi, ji) in self.a.links
        return True

    def _detect_hub(self) -> None:
        """Shape used by the threshold-vector preimage gadget: every fork is
        (u, {z, z}) for one shared hub state z, at most one fork per origin,
        and every join is an arity-2 linked join.  Parallel reachability then
        reduces to a subset dynamic program over join values."""
        a = self.a
        self.hub = None
        if not a.forks or not a.links:
            return
        if set(range(len(a.joins))) != self.linked_joins:
            return
        # forks outside any link can never be closed once all joins are
        # linked, so only the linked forks determine the shape
        live = sorted(self.linked_forks)
        hubs = {a.forks[fi][1][0] for fi in live}
        if len(hubs) != 1:
            return
        z = next(iter(hubs))
        origins = [a.forks[fi][0] for fi in live]
        if len(set(origins)) != len(origins):
            return
        for fi in live:
            if a.forks[fi][1] != (z, z):
                return
        fork_origin = {fi: o for fi, (o, _br) in enumerate(a.forks)}
        joins_map: dict[tuple[str, tuple[str, str]], set[str]] = {}
        by_branches: dict[tuple[str, str], list[tuple[str, str]]] = {}
        for (fi, ji) in a.links:
            br, tgt = a.joins[ji]
            if len(br) != 2:
                return
            joins_map.setdefault((fork_origin[fi], br), set()).add(tgt)
            by_branches.setdefault(br, []).append((fork_origin[fi], tgt))
        self.hub = (z, joins_map, by_branches)

    def _match_exists(self, fbr: tuple[str, ...], jbr: tuple[str, ...],
                      rel: set[Pair]) -> bool:
        n = len(fbr)
        adj = [[j for j in range(n) if (fbr[i], jbr[j]) in rel] for i in range(n)]
        match_r: list[int] = [-1] * n

        def aug(i: int, seen: set[int]) -> bool:
            for j in adj[i]:
                if j in seen:
                    continue
                seen.add(j)
                if match_r[j] == -1 or aug(match_r[j], seen):
                    match_r[j] = i
                    return True
            return False

        return all(aug(i, set()) for i in range(n))

    def _reachable_pairs(self) -> frozenset[Pair]:
        a = self.a
        rel: set[Pair] = {(p, q) for (p, _l, q) in a.seq}
        fork_groups: dict[tuple[str, ...], set[str]] = {}
        join_groups: dict[tuple[str, ...], set[str]] = {}
        if not a.links:
            for (o, br) in a.forks:
                fork_groups.setdefault(br, set()).add(o)
            for (br, t) in a.joins:
                join_groups.setdefault(br, set()).add(t)
        changed = True
        while changed:
            changed = False
            by_src: dict[str, set[str]] = {}
            for (p, q) in rel:
                by_src.setdefault(p, set()).add(q)
            new: set[Pair] = set()
            for (p, q) in rel:
                for r in by_src.get(q, ()):
                    if (p, r) not in rel:
                        new.add((p, r))
            if not a.links:
                for fbr, origins in fork_groups.items():
                    for jbr, targets in join_groups.items():
                        if len(fbr) != len(jbr):
                            continue
                        if self._match_exists(fbr, jbr, rel):
                            for p in origins:
                                for q in targets:
                                    if (p, q) not in rel:
                                        new.add((p, q))
            else:
                for fi, (p, fbr) in enumerate(a.forks):
                    for ji in self.compat[fi]:
                        jbr, q = a.joins[ji]
                        if len(fbr) != len(jbr) or (p, q) in rel or (p, q) in new:
                            continue
                        if self._match_exists(fbr, jbr, rel):
                            new.add((p, q))
            if new:
                rel |= new
                changed = True
        return frozenset(rel)

    def _k_all(self) -> None:
        """K_{p,q}: one-level expansions by an equal-arity fork/join pair."""
        a = self.a
        acc: dict[Pair, set[Multiset]] = {}
        match_memo: dict[tuple, tuple[Multiset, ...]] = {}

        def matchings(fbr: tuple[str, ...], jbr: tuple[str, ...]) -> tuple[Multiset, ...]:
            key = (fbr, jbr)
            got = match_memo.get(key)
            if got is not None:
                return got
            n = len(fbr)
            used = [False] * n
            out: set[Multiset] = set()

            def assign(i: int, pairs: list[Pair]):
                if i == n:
                    out.add(tuple(sorted(pairs)))
                    return
                seen_here: set[str] = set()
                for j in range(n):
                    if used[j] or jbr[j] in seen_here:
                        continue
                    if (fbr[i], jbr[j]) not in self.reach:
                        continue
                    seen_here.add(jbr[j])
                    used[j] = True
                    pairs.append((fbr[i], jbr[j]))
                    assign(i + 1, pairs)
                    pairs.pop()
                    used[j] = False

            assign(0, [])
            res = tuple(sorted(out))
            match_memo[key] = res
            return res

        if not a.links:
            fork_groups: dict[tuple[str, ...], set[str]] = {}
            join_groups: dict[tuple[str, ...], set[str]] = {}
            for (o, br) in a.forks:
                fork_groups.setdefault(br, set()).add(o)
            for (br, t) in a.joins:
                join_groups.setdefault(br, set()).add(t)
            for fbr, origins in fork_groups.items():
                for jbr, targets in join_groups.items():
                    if len(fbr) != len(jbr):
                        continue
                    ms = matchings(fbr, jbr)
                    if not ms:
                        continue
                    for p in origins:
                        for q in targets:
                            acc.setdefault((p, q), set()).update(ms)
        else:
            for fi, (p, fbr) in enumerate(a.forks):
                for ji in self.compat[fi]:
                    jbr, q = a.joins[ji]
                    if len(fbr) != len(jbr):
                        continue
                    ms = matchings(fbr, jbr)
                    if ms:
                        acc.setdefault((p, q), set()).update(ms)
        self.k = {pq: tuple(sorted(ms)) for pq, ms in acc.items() if ms}

    def f_level(self, pq: Pair, size: int) -> frozenset[Multiset]:
        """Members of F_{p,q} of total multiplicity exactly `size`."""
        levels = self.f_levels.setdefault(pq, {})
        if size in levels:
            return levels[size]
        if size < 1 or pq not in self.reach:
            levels[size] = frozenset()
            return levels[size]
        if size == 1:
            levels[1] = frozenset({(pq,)})
            return levels[1]
        out: set[Multiset] = set()
        for u in range(1, size):
            arity = size - u + 1
            if arity < 2:
                continue
            for m in self.f_level(pq, u):
                distinct = set(m)
                for e in distinct:
                    for x in self.k.get(e, ()):
                        if len(x) != arity:
                            continue
                        rest = list(m)
                        rest.remove(e)
                        out.add(tuple(sorted(rest + list(x))))
        levels[size] = frozenset(out)
        return levels[size]


@lru_cache(maxsize=256)
def _analysis(a: BranchingAutomaton) -> _Analysis:
    return _Analysis(a)


# --- public operations --------------------------------------------------------


def reachable_pairs(a: BranchingAutomaton) -> frozenset[Pair]:
    """Pairs (p, q) joined by a path with a nonempty label."""
    return _analysis(a).reach


def f_saturate(a: BranchingAutomaton, p: str, q: str, max_total: int) -> frozenset[Multiset]:
    """All members of F_{p,q} with total multiplicity <= max_total.

    Complete at the bound: an expansion step strictly increases multiset
    size, so every member of size s is produced from smaller ones.
    """
    if max_total < 1:
        raise AutomatonError("max_total must be >= 1")
    an = _analysis(a)
    out: set[Multiset] = set()
    for s in range(1, max_total + 1):
        out |= an.f_level((p, q), s)
    return frozenset(out)


def _reach_term(an: _Analysis, t: SpTerm) -> frozenset[Pair]:
    memo = an.reach_memo
    got = memo.get(t)
    if got is not None:
        return got
    if isinstance(t, Letter):
        res = frozenset((p, q) for (p, l, q) in an.a.seq if l == t.symbol)
    elif isinstance(t, Seq):
        rel = _reach_term(an, t.children[0])
        for c in t.children[1:]:
            nxt = _reach_term(an, c)
            by_src: dict[str, list[str]] = {}
            for (p, q) in nxt:
                by_src.setdefault(p, []).append(q)
            rel = frozenset((p, r) for (p, q) in rel for r in by_src.get(q, ()))
        res = rel
    else:
        res = _reach_par(an, t.children)
    memo[t] = res
    return res


def _hub_pairs(an: _Analysis, comps: tuple[SpTerm, ...]) -> frozenset[tuple[str, str]]:
    """For hub-shaped automata: the sorted value pairs (s, t) such that the
    parallel product of comps can run as two hub branches ending in s and t."""
    got = an.hub_w_memo.get(comps)
    if got is not None:
        return got
    z, joins_map, _by_br = an.hub

    def w_of(group: tuple[SpTerm, ...]) -> frozenset[str]:
        if len(group) == 1:
            rel = _reach_term(an, group[0])
            return frozenset(q for (p, q) in rel if p == z)
        return frozenset(t for (s, s2) in _hub_pairs(an, group)
                         for t in joins_map.get((z, (s, s2)), ()))

    n = len(comps)
    out: set[tuple[str, str]] = set()
    first = comps[0]
    rest = comps[1:]
    for mask in range(1 << (n - 1)):
        left = [first] + [rest[i] for i in range(n - 1) if mask >> i & 1]
        right = [rest[i] for i in range(n - 1) if not (mask >> i & 1)]
        if not right:
            continue
        wl = w_of(tuple(left))
        if not wl:
            continue
        wr = w_of(tuple(right))
        for s in wl:
            for t in wr:
                out.add((s, t) if s <= t else (t, s))
    res = frozenset(out)
    an.hub_w_memo[comps] = res
    return res


def _can_fill(an: _Analysis, pq: Pair, distinct: tuple[SpTerm, ...],
              counts: tuple[int, ...]) -> bool:
    """Does the parallel product of the component multiset (>= 2 in total)
    label a path from p to q?

    Equivalent to "some member of F_{p,q} of size n admits a perfect
    matching against the components": one K-expansion is applied and each
    slot recursively takes one component or a sub-product.
    """
    key = (pq, distinct, counts)
    got = an.canpar_memo.get(key)
    if got is not None:
        return got
    res = False
    total = sum(counts)
    rels = [_reach_term(an, c) for c in distinct]
    for m0 in an.k.get(pq, ()):
        if len(m0) > total:
            continue
        if _assign_slots(an, m0, 0, distinct, counts, rels):
            res = True
            break
    an.canpar_memo[key] = res
    return res


def _assign_slots(an: _Analysis, slots: tuple[Pair, ...], si: int,
                  distinct: tuple[SpTerm, ...], counts: tuple[int, ...],
                  rels) -> bool:
    """Distribute the component multiset over the remaining slots, each slot
    getting a nonempty group that is a single matching component or a
    sub-product that can fill it."""
    remaining = len(slots) - si
    total = sum(counts)
    if remaining == 0:
        return total == 0
    slot = slots[si]
    if remaining == 1:
        if total == 1:
            i = counts.index(1)
            return slot in rels[i]
        return (slot in an.par_pairs
                and _can_fill(an, slot, *_strip_zero(distinct, counts)))
    # enumerate distinct nonempty sub-multisets for this slot, leaving at
    # least one component per remaining slot
    anchor = slot == slots[si + 1]
    r = len(distinct)

    def subsets(i: int, chosen: list[int]) -> bool:
        if i == r:
            group = tuple(chosen)
            gtotal = sum(group)
            if gtotal == 0 or total - gtotal < remaining - 1:
                return False
            if gtotal == 1:
                gi = group.index(1)
                if slot not in rels[gi]:
                    return False
            else:
                if slot not in an.par_pairs:
                    return False
                if not _can_fill(an, slot, *_strip_zero(distinct, group)):
                    return False
            rest = tuple(c - g for c, g in zip(counts, group))
            return _assign_slots(an, slots, si + 1, distinct, rest, rels)
        lo = 1 if (anchor and i == 0 and counts[0] > 0) else 0
        for take in range(lo, counts[i] + 1):
            chosen.append(take)
            if subsets(i + 1, chosen):
                chosen.pop()
                return True
            chosen.pop()
        return False

    return subsets(0, [])


def _strip_zero(distinct, counts):
    pairs = [(d, c) for d, c in zip(distinct, counts) if c]
    return tuple(d for d, _ in pairs), tuple(c for _, c in pairs)


def _reach_par(an: _Analysis, comps: tuple[SpTerm, ...]) -> frozenset[Pair]:
    key = ("par", comps)
    got = an.reach_memo.get(key)
    if got is not None:
        return got
    if an.hub is not None:
        _z, _jm, by_branches = an.hub
        res2: set[Pair] = set()
        for st in _hub_pairs(an, comps):
            for (origin, tgt) in by_branches.get(st, ()):
                res2.add((origin, tgt))
        out2 = frozenset(res2)
        an.reach_memo[key] = out2
        return out2
    distinct: list[SpTerm] = []
    counts: list[int] = []
    for c in comps:  # comps are sorted, so equal components are adjacent
        if distinct and distinct[-1] == c:
            counts[-1] += 1
        else:
            distinct.append(c)
            counts.append(1)
    dt, ct = tuple(distinct), tuple(counts)
    rels = [_reach_term(an, c) for c in dt]
    fill_mask = 0
    for rel in rels:
        for e in rel:
            ix = an.pair_ix.get(e)
            if ix is not None:
                fill_mask |= 1 << ix
    allowed = fill_mask | an.rec_mask
    n = len(comps)
    res: set[Pair] = set()
    for pq, m0, mask in an.k_flat:
        if pq in res or len(m0) > n:
            continue
        if mask & ~allowed:
            continue
        if _assign_slots(an, m0, 0, dt, ct, rels):
            res.add(pq)
    out = frozenset(res)
    an.reach_memo[key] = out
    return out


def membership(a: BranchingAutomaton, t: SpTerm) -> bool:
    """Does some initial-to-final path carry label t?"""
    unknown = letters_of(t) - set(a.alphabet)
    if unknown:
        raise AutomatonError(f"letters {sorted(unknown)} not in the alphabet")
    an = _analysis(a)
    rel = _reach_term(an, t)
    return any((i, f) in rel for i in a.initial for f in a.final)


def is_empty(a: BranchingAutomaton) -> bool:
    an = _analysis(a)
    return not any((i, f) in an.reach for i in a.initial for f in a.final)


# --- independent path-search oracle -------------------------------------------


def _oracle_reach(an: _Analysis, t: SpTerm) -> frozenset[Pair]:
    memo = an.oracle_memo
    got = memo.get(t)
    if got is not None:
        return got
    if isinstance(t, Letter):
        res = frozenset((p, q) for (p, l, q) in an.a.seq if l == t.symbol)
    elif isinstance(t, Seq):
        rel = _oracle_reach(an, t.children[0])
        for c in t.children[1:]:
            nxt = _oracle_reach(an, c)
            by_src: dict[str, list[str]] = {}
            for (p, q) in nxt:
                by_src.setdefault(p, []).append(q)
            rel = frozenset((p, r) for (p, q) in rel for r in by_src.get(q, ()))
        res = rel
    else:
        res = _oracle_par(an, t.children)
    memo[t] = res
    return res


def _oracle_par(an: _Analysis, comps: tuple[SpTerm, ...]) -> frozenset[Pair]:
    """All (p,q) such that the parallel product of comps labels a p-to-q path,
    by explicit recursion over fork choices and component groupings."""
    key = ("par", comps)
    got = an.oracle_memo.get(key)
    if got is not None:
        return got
    a = an.a
    n = len(comps)
    res: set[Pair] = set()
    for fi, (p, fbr) in enumerate(a.forks):
        r = len(fbr)
        if r > n:
            continue
        for ji, (jbr, q) in enumerate(a.joins):
            if len(jbr) != r or not an.links_ok(fi, ji) or (p, q) in res:
                continue
            # distribute components over r nonempty branch groups
            def groups_ok(grouping: tuple[int, ...]) -> bool:
                buckets: list[list[SpTerm]] = [[] for _ in range(r)]
                for ci, g in enumerate(grouping):
                    buckets[g].append(comps[ci])
                if any(not b for b in buckets):
                    return False
                # match buckets to join branches (fork branch i fixed)
                used = [False] * r

                def assign(i: int) -> bool:
                    if i == r:
                        return True
                    b = buckets[i]
                    for j in range(r):
                        if used[j]:
                            continue
                        if len(b) == 1:
                            ok = (fbr[i], jbr[j]) in _oracle_reach(an, b[0])
                        else:
                            ok = (fbr[i], jbr[j]) in _oracle_par(an, tuple(sorted(b)))
                        if ok:
                            used[j] = True
                            if assign(i + 1):
                                used[j] = False
                                return True
                            used[j] = False
                    return False

                return assign(0)

            if any(groups_ok(g) for g in product(range(r), repeat=n)):
                res.add((p, q))
    out = frozenset(res)
    an.oracle_memo[key] = out
    return out


def membership_oracle(a: BranchingAutomaton, t: SpTerm) -> bool:
    an = _analysis(a)
    rel = _oracle_reach(an, t)
    return any((i, f) in rel for i in a.initial for f in a.final)


# --- closure constructions ------------------------------------------------------


def rename_states(a: BranchingAutomaton, fn) -> BranchingAutomaton:
    return make_automaton(
        [fn(s) for s in a.states], a.alphabet,
        [(fn(p), l, fn(q)) for (p, l, q) in a.seq],
        [(fn(o), [fn(b) for b in br]) for (o, br) in a.forks],
        [([fn(b) for b in br], fn(t)) for (br, t) in a.joins],
        [fn(s) for s in a.initial], [fn(s) for s in a.final],
        a.links)


def union(a1: BranchingAutomaton, a2: BranchingAutomaton) -> BranchingAutomaton:
    """Disjoint union; accepts L(a1) | L(a2)."""
    b1 = rename_states(a1, lambda s: f"0:{s}")
    b2 = rename_states(a2, lambda s: f"1:{s}")
    nf1 = len(b1.forks)
    nj1 = len(b1.joins)
    return make_automaton(
        b1.states + b2.states,
        set(b1.alphabet) | set(b2.alphabet),
        set(b1.seq) | set(b2.seq),
        list(b1.forks) + list(b2.forks),
        list(b1.joins) + list(b2.joins),
        set(b1.initial) | set(b2.initial),
        set(b1.final) | set(b2.final),
        set(b1.links) | {(fi + nf1, ji + nj1) for (fi, ji) in b2.links})


def union_all(automata) -> BranchingAutomaton:
    automata = list(automata)
    if not automata:
        raise AutomatonError("union of no automata")
    out = automata[0]
    for b in automata[1:]:
        out = union(out, b)
    return out


def relabel(a: BranchingAutomaton, h: dict[str, str]) -> BranchingAutomaton:
    """Image under a letter-to-letter morphism."""
    missing = set(a.alphabet) - set(h)
    if missing:
        raise AutomatonError(f"relabel map misses letters {sorted(missing)}")
    return make_automaton(
        a.states, set(h[x] for x in a.alphabet),
        [(p, h[l], q) for (p, l, q) in a.seq],
        a.forks, a.joins, a.initial, a.final, a.links)


def is_sequentially_separated(a: BranchingAutomaton) -> bool:
    an = _analysis(a)
    for (p, q) in an.par_pairs:
        has_seq = any((p2, q2) == (p, q) for (p2, _l, q2) in a.seq) or \
            any((p, r) in an.reach and (r, q) in an.reach for r in a.states)
        if has_seq and an.k.get((p, q)):
            # a parallel path exists iff some K expansion does
            if any(True for _ in an.k[(p, q)]):
                return False
    return True


def sequentially_separate(a: BranchingAutomaton) -> BranchingAutomaton:
    """Language-preserving transform making each (p,q) carry only sequential
    or only parallel labels (state-doubling construction).

    Already-separated automata are returned unchanged.
    """
    if is_sequentially_separated(a):
        return a

    def nm(s: str, b: bool) -> str:
        return f"{s}^{'s' if b else 'j'}"

    states = [nm(s, b) for s in a.states for b in (True, False)]
    seq = [(nm(p, b), l, nm(q, True)) for (p, l, q) in a.seq for b in (True, False)]
    forks = []
    fork_orig = []
    for fi, (o, br) in enumerate(a.forks):
        for ob in (True, False):
            for tags in product((True, False), repeat=len(br)):
                forks.append((nm(o, ob), [nm(s, t) for s, t in zip(br, tags)]))
                fork_orig.append(fi)
    joins = []
    join_orig = []
    for ji, (br, t) in enumerate(a.joins):
        for tags in product((True, False), repeat=len(br)):
            joins.append(([nm(s, tg) for s, tg in zip(br, tags)], nm(t, False)))
            join_orig.append(ji)
    links = set()
    if a.links:
        for nfi, ofi in enumerate(fork_orig):
            for nji, oji in enumerate(join_orig):
                if (ofi, oji) in a.links:
                    links.add((nfi, nji))
    return make_automaton(
        states, a.alphabet, seq, forks, joins,
        [nm(s, b) for s in a.initial for b in (True, False)],
        [nm(s, b) for s in a.final for b in (True, False)],
        links)


def prune(a: BranchingAutomaton) -> BranchingAutomaton:
    """Drop states that cannot occur on any accepting path (over-approximated
    forward from initial states and backward from final states)."""
    fwd: set[str] = set(a.initial)
    changed = True
    while changed:
        changed = False
        for (p, _l, q) in a.seq:
            if p in fwd and q not in fwd:
                fwd.add(q)
                changed = True
        for (o, br) in a.forks:
            if o in fwd:
                for b in br:
                    if b not in fwd:
                        fwd.add(b)
                        changed = True
        for (br, t) in a.joins:
            if t not in fwd and all(b in fwd for b in br):
                fwd.add(t)
                changed = True
    bwd: set[str] = set(a.final)
    changed = True
    while changed:
        changed = False
        for (p, _l, q) in a.seq:
            if q in bwd and p not in bwd:
                bwd.add(p)
                changed = True
        for (br, t) in a.joins:
            if t in bwd:
                for b in br:
                    if b not in bwd:
                        bwd.add(b)
                        changed = True
        for (o, br) in a.forks:
            if o not in bwd and all(b in bwd for b in br):
                bwd.add(o)
                changed = True
    keep = fwd & bwd
    if keep == set(a.states):
        return a
    fmap: dict[int, int] = {}
    forks = []
    for fi, (o, br) in enumerate(a.forks):
        if o in keep and all(b in keep for b in br):
            fmap[fi] = len(forks)
            forks.append((o, br))
    jmap: dict[int, int] = {}
    joins = []
    for ji, (br, t) in enumerate(a.joins):
        if t in keep and all(b in keep for b in br):
            jmap[ji] = len(joins)
            joins.append((br, t))
    return make_automaton(
        [s for s in a.states if s in keep], a.alphabet,
        [t for t in a.seq if t[0] in keep and t[2] in keep],
        forks, joins,
        a.initial & keep, a.final & keep,
        [(fmap[fi], jmap[ji]) for (fi, ji) in a.links
         if fi in fmap and ji in jmap])


def enumerate_language(a: BranchingAutomaton, max_size: int,
                       alphabet=None) -> list[SpTerm]:
    """Accepted terms of size <= max_size, in enumeration order."""
    if max_size < 1:
        raise AutomatonError("max_size must be >= 1")
    ab = tuple(sorted(set(alphabet if alphabet is not None else a.alphabet)))
    if not ab:
        return []
    return [t for t in enumerate_terms(ab, max_size) if membership(a, t)]


def languages_equal(a: BranchingAutomaton, b: BranchingAutomaton,
                    max_size: int, alphabet=None) -> bool:
    ab = set(alphabet) if alphabet is not None else set(a.alphabet) | set(b.alphabet)
    for t in enumerate_terms(tuple(sorted(ab)), max_size):
        if membership(a, t) != membership(b, t):
            return False
    return True


# --- JSON ------------------------------------------------------------------------


def to_json(a: BranchingAutomaton) -> dict:
    return {
        "states": list(a.states),
        "alphabet": list(a.alphabet),
        "initial": sorted(a.initial),
        "final": sorted(a.final),
        "seq": sorted([p, l, q] for (p, l, q) in a.seq),
        "fork": [{"id": i, "from": o, "to": list(br)}
                 for i, (o, br) in enumerate(a.forks)],
        "join": [{"id": i, "from": list(br), "to": t}
                 for i, (br, t) in enumerate(a.joins)],
        "links": sorted([fi, ji] for (fi, ji) in a.links),
    }


def from_json(doc: dict) -> BranchingAutomaton:
    try:
        fork_ids = {f["id"]: i for i, f in enumerate(doc.get("fork", []))}
        join_ids = {j["id"]: i for i, j in enumerate(doc.get("join", []))}
        return make_automaton(
            doc["states"], doc["alphabet"],
            [tuple(t) for t in doc.get("seq", [])],
            [(f["from"], f["to"]) for f in doc.get("fork", [])],
            [(j["from"], j["to"]) for j in doc.get("join", [])],
            doc["initial"], doc["final"],
            [(fork_ids[fi], join_ids[ji]) for (fi, ji) in doc.get("links", [])])
    except KeyError as e:
        raise AutomatonError(f"missing field {e.args[0]!r} in automaton JSON") from None


def load(path: str) -> BranchingAutomaton:
    with open(path, encoding="utf-8") as fh:
        return from_json(json.load(fh))


def save(a: BranchingAutomaton, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json(a), fh, indent=2)
        fh.write("\n")
