"""The effective complementation pipeline, and the F-set machinery it rests
on: Parikh images of parallel-only automata, semilinear F-sets, the
sequential-class quotient with its counting morphism into vectors, preimage
automata, and complement assembly.

The same F-set semilinearity also yields two workhorse constructions used
elsewhere: an intersection product of branching automata, and link
elimination by rebuilding an automaton's parallel structure from gadgets.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from . import presburger as pb
from .automata import (BranchingAutomaton, _analysis, make_automaton, prune,
                       sequentially_separate, union_all)
from .parikh import Grammar, parikh_semilinear
from .semilinear import (LinearSet, SemilinearSet, sl_compact, sl_difference,
                         sl_disjointify, sl_intersect, sl_is_empty, sl_member,
                         sl_union, vec_add)
from .terms import Letter, Par, SpTerm, par, seq, term_key

Pair = tuple[str, str]


class NotParallelOnly(ValueError):
    pass


class LinkedInput(ValueError):
    pass


# --- Parikh image of a parallel-only automaton ---------------------------------


def _check_parallel_only(a: BranchingAutomaton) -> None:
    """Structural guard: no state both ends a unit (letter/join) and starts
    one (letter/fork), so no path composes two nonempty labels sequentially."""
    enders = {q for (_p, _l, q) in a.seq} | {t for (_br, t) in a.joins}
    starters = {p for (p, _l, _q) in a.seq} | {o for (o, _br) in a.forks}
    bad = enders & starters
    if bad:
        raise NotParallelOnly(
            f"states {sorted(bad)} allow sequential composition of labels")


def parikh_image(a: BranchingAutomaton) -> tuple[tuple[str, ...], SemilinearSet]:
    """Parikh image of L(a) for a parallel-only automaton.

    Returns (letter order, semilinear set) with one coordinate per letter.
    """
    _check_parallel_only(a)
    an = _analysis(a)
    starts = [(i, f) for i in sorted(a.initial) for f in sorted(a.final)
              if (i, f) in an.reach]
    letters = tuple(sorted(a.alphabet))
    if not starts:
        return letters, SemilinearSet.empty(len(letters))
    nts = sorted(an.reach)
    prods: list[tuple] = []
    for (p, q) in nts:
        for (p2, l, q2) in sorted(a.seq):
            if (p2, q2) == (p, q):
                prods.append(((p, q), (("L", l),)))
        for m in an.k.get((p, q), ()):
            prods.append(((p, q), tuple(sorted(m))))
    root = ("$start",)
    for s in starts:
        prods.append((root, (s,)))
    terminals = tuple(("L", l) for l in letters)
    g = Grammar(tuple(nts) + (root,), terminals, tuple(prods), root)
    return letters, parikh_semilinear(g)


# --- F-sets as semilinear sets ---------------------------------------------------


def compute_F(a: BranchingAutomaton) -> tuple[tuple[Pair, ...], dict[Pair, SemilinearSet]]:
    """Semilinear F_{p,q} for every reachable pair, via the two-layer gadget
    automaton over pair letters fed to the Parikh computation.

    Coordinates are the reachable pairs of `a` in sorted order (the
    conceptual space is all of Q x Q; unreachable pairs never occur in any
    member, so their coordinates are omitted).
    """
    an = _analysis(a)
    pair_order = tuple(sorted(an.reach))
    pix = {pq: i for i, pq in enumerate(pair_order)}
    dim = len(pair_order)

    def q1(s):
        return f"1.{s}"

    def q2(s):
        return f"2.{s}"

    states = [q1(s) for s in a.states] + [q2(s) for s in a.states]
    letters = [f"{r}>{s}" for (r, s) in pair_order]
    seqs = [(q1(r), f"{r}>{s}", q2(s)) for (r, s) in pair_order]
    forks = [(q1(o), [q1(b) for b in br]) for (o, br) in a.forks]
    joins = [([q2(b) for b in br], q2(t)) for (br, t) in a.joins]

    out: dict[Pair, SemilinearSet] = {}
    for (p, q) in pair_order:
        gadget = make_automaton(states, letters, seqs, forks, joins,
                                [q1(p)], [q2(q)], a.links)
        order, s = parikh_image(gadget)
        lix = {l: i for i, l in enumerate(order)}
        perm = [lix[f"{r}>{s2}"] for (r, s2) in pair_order]

        def embed(v):
            return tuple(v[j] for j in perm)

        parts = tuple(LinearSet(embed(part.base),
                                frozenset(embed(w) for w in part.periods))
                      for part in s.parts)
        out[(p, q)] = SemilinearSet(dim, parts)
    return pair_order, out


# --- the quotient context ---------------------------------------------------------


@dataclass(frozen=True)
class Generator:
    reach_set: frozenset
    witness: SpTerm


@dataclass
class QuotientContext:
    automaton: BranchingAutomaton          # sequentially separated
    pair_order: tuple[Pair, ...]           # coordinates of F vectors
    F: dict[Pair, SemilinearSet]
    generators: tuple[Generator, ...]      # the sequential classes
    delta: dict[frozenset, SemilinearSet]  # reach-set -> vectors of that class
    delta_parts: list[tuple[frozenset, LinearSet]]  # globally disjoint parts
    seq_table: dict[tuple[int, int], int]
    _class_memo: dict = field(default_factory=dict)
    _prod_memo: dict = field(default_factory=dict)
    _mu_memo: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.generators)

    def gen_index(self, reach_set: frozenset) -> int:
        for i, g in enumerate(self.generators):
            if g.reach_set == reach_set:
                return i
        raise KeyError(f"no generator with reach set {sorted(reach_set)}")

    def unit(self, i: int) -> tuple[int, ...]:
        return tuple(1 if j == i else 0 for j in range(self.k))

    def class_of_vector(self, v: tuple[int, ...]) -> frozenset:
        got = self._class_memo.get(v)
        if got is not None:
            return got
        if sum(v) == 1:
            d = self.generators[v.index(1)].reach_set
        else:
            for d2, s in self.delta.items():
                if sl_member(v, s):
                    d = d2
                    break
            else:
                raise ValueError(f"vector {v} not covered by any class")
        self._class_memo[v] = d
        return d

    def seq_product(self, v1: tuple[int, ...], v2: tuple[int, ...]) -> tuple[int, ...]:
        got = self._prod_memo.get((v1, v2))
        if got is not None:
            return got
        d = _compose(self.class_of_vector(v1), self.class_of_vector(v2))
        out = self.unit(self.gen_index(frozenset(d)))
        self._prod_memo[(v1, v2)] = out
        return out


def _compose(d1, d2) -> frozenset:
    by_src: dict[str, set[str]] = {}
    for (p, q) in d2:
        by_src.setdefault(p, set()).add(q)
    return frozenset((p, r) for (p, q) in d1 for r in by_src.get(q, ()))


def _attainability_formula(gen_sets: list[frozenset], pair_order,
                           F_pq: SemilinearSet, cvars: list[str]) -> pb.Formula:
    """exists slot counts x_{i,(r,s)} with per-generator sums c_i whose
    aggregate pair vector lies in F_pq."""
    xvar: dict[tuple[int, Pair], str] = {}
    for i, d in enumerate(gen_sets):
        for rs in sorted(d):
            xvar[(i, rs)] = f"_x{i}.{rs[0]}.{rs[1]}"
    conj = []
    for i, d in enumerate(gen_sets):
        total = pb.lin_make(0, [(xvar[(i, rs)], 1) for rs in sorted(d)])
        conj.append(pb.eq(total, pb.lin_var(cvars[i])))
    aggregates = []
    for rs in pair_order:
        items = [(xvar[(i, rs2)], 1) for (i, rs2) in xvar if rs2 == rs]
        aggregates.append(pb.lin_make(0, items))
    conj.append(_member_formula(F_pq, aggregates))
    return _close_exists(pb.conj(conj), sorted(set(xvar.values())))


def _member_formula(s: SemilinearSet, coord_terms: list[pb.Lin]) -> pb.Formula:
    """Formula stating that the vector given by coord_terms lies in s."""
    fresh = itertools.count()
    disj = []
    for part in s.parts:
        periods = sorted(part.periods)
        lams = [f"_j{next(fresh)}" for _ in periods]
        eqs = []
        for j, term in enumerate(coord_terms):
            rhs = pb.Lin(part.base[j], tuple((lams[i], periods[i][j])
                                             for i in range(len(periods))
                                             if periods[i][j]))
            eqs.append(pb.eq(term, rhs))
        disj.append(_close_exists(pb.conj(eqs), lams))
    return pb.disj(disj)


def _close_exists(f: pb.Formula, names) -> pb.Formula:
    for v in reversed(list(names)):
        f = pb.Exists(v, f)
    return f


def build_quotient_context(a: BranchingAutomaton) -> QuotientContext:
    """Generators, class sets and the sequential product table of the
    path-signature quotient, by the realizable-reach-set fixpoint."""
    if a.links:
        a = linked_to_plain(a)
    b = sequentially_separate(a)
    pair_order, F = compute_F(b)
    reach = sorted(pair_order)

    letter_classes: dict[frozenset, SpTerm] = {}
    for l in sorted(b.alphabet):
        d = frozenset((p, q) for (p, l2, q) in b.seq if l2 == l)
        w = Letter(l)
        if d not in letter_classes or term_key(w) < term_key(letter_classes[d]):
            letter_classes[d] = w

    def order_generators(seqs: dict[frozenset, SpTerm]):
        nonzero = sorted(((d, w) for d, w in seqs.items() if d),
                         key=lambda dw: term_key(dw[1]))
        zero = [(d, w) for d, w in seqs.items() if not d]
        return nonzero + zero

    def seq_closure(par_classes: dict[frozenset, SpTerm]) -> dict[frozenset, SpTerm]:
        """Smallest-witness-first closure under sequential products of >= 2
        irreducible factors (letters and parallel posets)."""
        factors = dict(letter_classes)
        for d, w in par_classes.items():
            if d not in factors or term_key(w) < term_key(factors[d]):
                factors[d] = w
        flist = sorted(factors.items(), key=lambda dw: term_key(dw[1]))
        heap = []
        tiebreak = itertools.count()
        for (d1, w1), (d2, w2) in itertools.product(flist, flist):
            w = seq(w1, w2)
            heapq.heappush(heap, (term_key(w), next(tiebreak), _compose(d1, d2), w))
        done: dict[frozenset, SpTerm] = {}
        while heap:
            key, _tb, d, w = heapq.heappop(heap)
            if d in done:
                continue
            done[d] = w
            for d2, w2 in flist:
                w3 = seq(w, w2)
                d3 = _compose(d, d2)
                if d3 not in done:
                    heapq.heappush(heap, (term_key(w3), next(tiebreak), d3, w3))
        out = dict(letter_classes)
        for d, w in done.items():
            if d not in out or term_key(w) < term_key(out[d]):
                out[d] = w
        return out

    seq_classes: dict[frozenset, SpTerm] = dict(letter_classes)
    par_classes: dict[frozenset, SpTerm] = {}
    cells_final: list[tuple[frozenset, SemilinearSet]] = []
    for _round in range(64):
        new_seq = seq_closure(par_classes)
        gens = order_generators(new_seq)
        k = len(gens)
        # canonical names so cached quantifier-free forms can be conjoined
        cvars = [f"x{i}" for i in range(k)]
        gen_sets = [d for d, _w in gens]
        sum2 = pb.le(pb.Lin(2, ()), pb.lin_make(0, [(c, 1) for c in cvars]))
        csl: dict[Pair, SemilinearSet] = {}
        for pq in reach:
            f_pq = F[pq]
            sizeable = any(sum(part.base) >= 2 or part.periods
                           for part in f_pq.parts)
            if not sizeable:
                csl[pq] = SemilinearSet.empty(k)
                continue
            fml = pb.conj([_attainability_formula(gen_sets, pair_order, f_pq, cvars),
                           sum2])
            csl[pq] = pb.formula_to_sl(fml, cvars)
        cells: list[tuple[frozenset, SemilinearSet]] = []
        qf_c = {pq: pb.sl_to_qf(csl[pq]) for pq in reach}

        def split(pairs, inset: frozenset, fml: pb.Formula):
            current = pb.formula_to_sl(fml, cvars)
            if sl_is_empty(current):
                return
            if not pairs:
                cells.append((inset, current))
                return
            pq = pairs[0]
            split(pairs[1:], inset | {pq}, pb.conj([fml, qf_c[pq]]))
            split(pairs[1:], inset, pb.conj([fml, pb.nnf(qf_c[pq], negated=True)]))

        split(reach, frozenset(), sum2)
        new_par: dict[frozenset, SpTerm] = {}
        for d, s in cells:
            base = min((sum(p.base), p.base) for p in s.parts)[1]
            w = par(*[gens[i][1] for i in range(k) for _ in range(base[i])])
            old = par_classes.get(d)
            new_par[d] = old if old is not None and term_key(old) <= term_key(w) else w
        stable = set(new_seq) == set(seq_classes) and set(new_par) == set(par_classes)
        seq_classes, par_classes = new_seq, new_par
        cells_final = cells
        if stable:
            break
    else:
        raise RuntimeError("quotient fixpoint did not stabilize")

    gens = order_generators(seq_classes)
    generators = tuple(Generator(d, w) for d, w in gens)
    k = len(generators)
    # the eq:cong signature of a sequential class is a function of its reach
    # set, and membership of the empty remainder distinguishes distinct reach
    # sets, so distinct reach sets are exactly the distinct classes.
    delta: dict[frozenset, SemilinearSet] = {}
    for i, g in enumerate(generators):
        unit = tuple(1 if j == i else 0 for j in range(k))
        delta[g.reach_set] = sl_union(
            delta.get(g.reach_set, SemilinearSet.empty(k)),
            SemilinearSet.of_vectors(k, [unit]))
    for d, s in cells_final:
        delta[d] = sl_union(delta.get(d, SemilinearSet.empty(k)), s)
    delta = {d: sl_compact(s) for d, s in delta.items()}

    delta_parts: list[tuple[frozenset, LinearSet]] = []
    for d in sorted(delta, key=sorted):
        for part in sl_disjointify(delta[d]).parts:
            delta_parts.append((d, part))

    seq_table: dict[tuple[int, int], int] = {}
    gen_ix = {g.reach_set: i for i, g in enumerate(generators)}
    for i, gi in enumerate(generators):
        for j, gj in enumerate(generators):
            d = frozenset(_compose(gi.reach_set, gj.reach_set))
            if d not in gen_ix:
                raise RuntimeError("sequential product left the generator set")
            seq_table[(i, j)] = gen_ix[d]

    return QuotientContext(b, pair_order, F, generators, delta, delta_parts,
                           seq_table)


def mu_of_term(ctx: QuotientContext, t: SpTerm) -> tuple[int, ...]:
    """The counting morphism into N^k (k = number of sequential classes)."""
    got = ctx._mu_memo.get(t)
    if got is not None:
        return got
    if isinstance(t, Letter):
        d = frozenset((p, q) for (p, l, q) in ctx.automaton.seq if l == t.symbol)
        v = ctx.unit(ctx.gen_index(d))
    elif isinstance(t, Par):
        v = tuple(0 for _ in range(ctx.k))
        for c in t.children:
            v = vec_add(v, mu_of_term(ctx, c))
    else:
        v = mu_of_term(ctx, t.children[0])
        for c in t.children[1:]:
            v = ctx.seq_product(v, mu_of_term(ctx, c))
    ctx._mu_memo[t] = v
    return v


# --- preimage automata and the complement -----------------------------------------


def preimage_automaton(ctx: QuotientContext,
                       target: tuple[int, ...] | LinearSet) -> BranchingAutomaton:
    """Automaton accepting the mu-preimage of a vector or of one of the
    disjoint linear class parts: the threshold-vector gadget, with the
    marker branch of the source construction replaced by fork-join links."""
    k = ctx.k
    parts = [part for (_d, part) in ctx.delta_parts]
    if isinstance(target, LinearSet) and target not in parts:
        raise ValueError("target part is not one of the context's parts")

    bound_vecs = [ctx.unit(i) for i in range(k)]
    if not isinstance(target, LinearSet):
        target = tuple(target)
        if len(target) != k or sum(target) < 1:
            raise ValueError("target vector malformed")
        bound_vecs.append(target)
    for part in parts:
        bound_vecs.append(part.base)
        for w in part.periods:
            bound_vecs.append(vec_add(part.base, w))
    m = tuple(max(v[i] for v in bound_vecs) for i in range(k))

    cap = 1
    for c in m:
        cap *= c + 1
    if cap > 400_000:
        raise RuntimeError(f"threshold state space too large ({cap})")

    s1 = list(itertools.product(*[range(c + 1) for c in m]))
    zero = tuple(0 for _ in range(k))
    part_state = {part: f"D{i}" for i, part in enumerate(parts)}
    state_part = {ps: part for part, ps in part_state.items()}

    def name(x) -> str:
        if isinstance(x, tuple):
            return "v" + ".".join(map(str, x))
        return x

    delta_memo: dict[tuple, object] = {}

    def delta_map(v: tuple[int, ...]):
        got = delta_memo.get(v)
        if got is not None:
            return got
        if all(v[i] <= m[i] for i in range(k)):
            out = v
        else:
            for part in parts:
                if part.member(v):
                    out = part_state[part]
                    break
            else:
                raise RuntimeError(f"vector {v} beyond threshold in no class part")
        delta_memo[v] = out
        return out

    def compose(x, y):
        if isinstance(x, tuple) and x == zero:
            return y
        if isinstance(y, tuple) and y == zero:
            return x
        vx = x if isinstance(x, tuple) else state_part[x].base
        vy = y if isinstance(y, tuple) else state_part[y].base
        return ctx.seq_product(vx, vy)

    def oplus(x, y):
        if isinstance(x, tuple) and isinstance(y, tuple):
            return delta_map(vec_add(x, y))
        if not isinstance(x, tuple) and isinstance(y, tuple):
            return x if y in state_part[x].periods else None
        if isinstance(x, tuple) and not isinstance(y, tuple):
            return y if x in state_part[y].periods else None
        return None

    all_objs = s1 + list(part_state.values())
    letters = sorted(ctx.automaton.alphabet)
    unit_of_letter = {}
    for l in letters:
        d = frozenset((p, q) for (p, l2, q) in ctx.automaton.seq if l2 == l)
        unit_of_letter[l] = ctx.unit(ctx.gen_index(d))
    if isinstance(target, LinearSet):
        final_objs = [part_state[target]] + [v for v in s1 if target.member(v)]
    else:
        final_objs = [target]

    # value-level pruning before materializing: keep only values both
    # reachable from the neutral element and co-reachable to a final value.
    # compose(u, o) factors through u's class, so u ranges over class
    # representatives only.
    oplus_pairs: dict[tuple, object] = {}
    nonzero_all = [x for x in all_objs if x != zero]
    for i1, x in enumerate(nonzero_all):
        for x2 in nonzero_all[i1:]:
            o = oplus(x, x2)
            if o is not None:
                oplus_pairs[(x, x2)] = o

    def class_key(x):
        if x == zero:
            return "0"
        v = x if isinstance(x, tuple) else state_part[x].base
        return ctx.class_of_vector(v)

    fwd: set = {zero}
    changed = True
    while changed:
        changed = False
        new: set = set()
        reps = {}
        for u in fwd:
            reps.setdefault(class_key(u), u)
        for x in fwd:
            for l in letters:
                new.add(compose(x, unit_of_letter[l]))
        for (x, x2), o in oplus_pairs.items():
            if x in fwd and x2 in fwd:
                for u in reps.values():
                    new.add(compose(u, o))
        if not new <= fwd:
            fwd |= new
            changed = True
    bwd: set = set(final_objs) & fwd
    class_groups: dict = {}
    for u in fwd:
        class_groups.setdefault(class_key(u), []).append(u)
    changed = True
    while changed:
        changed = False
        for x in fwd:
            if x in bwd:
                continue
            if any(compose(x, unit_of_letter[l]) in bwd for l in letters):
                bwd.add(x)
                changed = True
        for (x, x2), o in oplus_pairs.items():
            if x not in fwd or x2 not in fwd:
                continue
            useful = False
            for ck, members in class_groups.items():
                if compose(members[0], o) in bwd:
                    useful = True
                    for u in members:
                        if u not in bwd:
                            bwd.add(u)
                            changed = True
            if useful and (x not in bwd or x2 not in bwd):
                bwd |= {x, x2}
                changed = True
    keep = fwd & bwd
    if not keep:
        return make_automaton(["dead"], letters, [], [], [], ["dead"], [])
    keep.add(zero)

    kept = [x for x in all_objs if x in keep]
    states = [name(x) for x in kept]
    seqs = []
    for x in kept:
        for l in letters:
            y = compose(x, unit_of_letter[l])
            if y in keep:
                seqs.append((name(x), l, name(y)))
    forks = []
    joins = []
    links = []
    fork_of = {}
    for x in kept:
        fork_of[name(x)] = len(forks)
        forks.append((name(x), [name(zero), name(zero)]))
    nonzero = [x for x in kept if x != zero]
    for i1, x in enumerate(nonzero):
        for x2 in nonzero[i1:]:
            o = oplus(x, x2)
            if o is None:
                continue
            for u in kept:
                tgt = compose(u, o)
                if tgt not in keep:
                    continue
                ji = len(joins)
                joins.append(([name(x), name(x2)], name(tgt)))
                links.append((fork_of[name(u)], ji))
    finals = [name(x) for x in final_objs if x in keep]
    aut = make_automaton(states, letters, seqs, forks, joins,
                         [name(zero)], finals, links)
    return prune(aut)


def _sizeable_parts(part: LinearSet) -> list[LinearSet]:
    """Linear parts covering exactly the total-multiplicity >= 2 members."""
    out, work, seen = [], [part], set()
    while work:
        p = work.pop()
        if p in seen:
            continue
        seen.add(p)
        if sum(p.base) >= 2:
            out.append(p)
        else:
            for w in p.periods:
                work.append(LinearSet(vec_add(p.base, w), p.periods))
    return out


def class_preimage_automaton(ctx: QuotientContext,
                             targets: SemilinearSet) -> BranchingAutomaton:
    """Link-free automaton for the mu-preimage of a semilinear set of class
    count vectors.

    A sequential poset is recognized by composing the classes of its
    irreducible factors; a parallel poset (whole poset or factor) by a
    counting gadget per linear part of its class cell: gadget branches each
    run one sequential poset and the join reads off the end-class multiset,
    with a dedicated recursion pair per (part, launching class) absorbing
    periods.  States are tagged so that a branch end certifies an actually
    sequential poset (a lone parallel factor is not one), which keeps the
    count interpretation of joins exact.  Size is polynomial in the context.
    """
    k = ctx.k
    if targets.dim != k:
        raise ValueError("target dimension does not match the class count")
    classes = [g.reach_set for g in ctx.generators]
    cix = {d: i for i, d in enumerate(classes)}

    def seq_st(i: int) -> str:
        return f"s{i}"

    def par1_st(i: int) -> str:
        return f"p{i}"

    fresh = "go"
    top_start, top_end = "top", "acc"
    states = [fresh, top_start, top_end]
    states += [seq_st(i) for i in range(k)] + [par1_st(i) for i in range(k)]
    letters = sorted(ctx.automaton.alphabet)
    seqs = []
    letter_class = {}
    for l in letters:
        d = frozenset((p, q) for (p, l2, q) in ctx.automaton.seq if l2 == l)
        letter_class[l] = cix[d]
        seqs.append((fresh, l, seq_st(cix[d])))
    for i, d in enumerate(classes):
        for l in letters:
            j = cix[frozenset(_compose(d, classes[letter_class[l]]))]
            seqs.append((seq_st(i), l, seq_st(j)))
            seqs.append((par1_st(i), l, seq_st(j)))
    # gadget requests grouped by (part, target): the recursion pair of a part
    # may be shared by all launches with the same landing state, but not
    # across targets (the closing join must determine the landing state)
    requests: dict[tuple[LinearSet, str], set[str]] = {}

    def request(part: LinearSet, source: str, target: str) -> None:
        requests.setdefault((part, target), set()).add(source)

    for d, s in ctx.delta.items():
        if d not in cix:
            continue
        cell_parts = [p2 for part in s.parts for p2 in _sizeable_parts(part)]
        for part in cell_parts:
            request(part, fresh, par1_st(cix[d]))
            for launch in range(k):
                j = cix[frozenset(_compose(classes[launch], d))]
                request(part, seq_st(launch), seq_st(j))
                request(part, par1_st(launch), seq_st(j))

    finals = [seq_st(i) for i in range(k) if sl_member(ctx.unit(i), targets)]
    top_parts = [p2 for part in targets.parts for p2 in _sizeable_parts(part)]
    for part in top_parts:
        request(part, top_start, top_end)

    forks: list = []
    joins: list = []
    tag = itertools.count()
    for (part, target), sources in sorted(
            requests.items(), key=lambda kv: (kv[0][1], kv[0][0].base)):
        _counting_gadget(states, forks, joins, part,
                         lambda i: fresh, lambda i: seq_st(i),
                         sorted(sources), target, f"g{next(tag)}")
    aut = make_automaton(states, letters, seqs, forks, joins,
                         [fresh, top_start], finals + [top_end])
    return prune(aut)


def _counting_gadget(states: list, forks: list, joins: list, part: LinearSet,
                     src_of, end_of, sources: list[str], target: str,
                     tag: str) -> None:
    """Fork/join structure accepting parallel compositions whose component
    counts lie in `part`; component i runs from src_of(i) to end_of(i).

    Periods are absorbed by a cons-list recursion pair (one period instance
    per cell, the last two instances merged) so every fork has arity >= 2
    without rewriting away single-component periods.
    """
    k = len(part.base)
    base_br = [src_of(i) for i in range(k) for _ in range(part.base[i])]
    base_ends = [end_of(i) for i in range(k) for _ in range(part.base[i])]
    periods = sorted(part.periods)

    def brs(w):
        return [src_of(i) for i in range(k) for _ in range(w[i])]

    def ends(w):
        return [end_of(i) for i in range(k) for _ in range(w[i])]

    joins.append((base_ends, target))
    for src in sources:
        forks.append((src, base_br))
    if not periods:
        return
    u, ub = f"{tag}.u", f"{tag}.w"
    states.extend([u, ub])
    for src in sources:
        forks.append((src, base_br + [u]))
        for w in periods:
            forks.append((src, base_br + brs(w)))
    joins.append((base_ends + [ub], target))
    for w in periods:
        joins.append((base_ends + ends(w), target))
        forks.append((u, brs(w) + [u]))
        joins.append((ends(w) + [ub], ub))
        for w2 in periods:
            forks.append((u, brs(w) + brs(w2)))
            joins.append((ends(w) + ends(w2), ub))


def complement(a: BranchingAutomaton) -> BranchingAutomaton:
    """Automaton for SP+(A) minus L(a): the preimage of the union of all
    class sets whose reach-set avoids the initial-final pairs."""
    if a.links:
        a = linked_to_plain(a)
    ctx = build_quotient_context(a)
    b = ctx.automaton
    acc = {(i, f) for i in b.initial for f in b.final}
    bad = SemilinearSet.empty(ctx.k)
    for d, s in ctx.delta.items():
        if not (d & acc):
            bad = sl_union(bad, s)
    if sl_is_empty(bad):
        return make_automaton(["dead"], b.alphabet, [], [], [], ["dead"], [])
    return class_preimage_automaton(ctx, sl_compact(bad))


# --- F-gadget rebuild: intersection and link elimination ----------------------------


def _gadget_for_part(states: list, forks: list, joins: list,
                     part: LinearSet, coords: list[tuple[str, str]],
                     p: str, q: str, tag: str) -> None:
    """Fork/join structure realizing the branch pair multisets of `part`
    between p and q; coords[i] = (source, destination) of pair coordinate i."""
    _counting_gadget(states, forks, joins, part,
                     lambda i: coords[i][0], lambda i: coords[i][1],
                     [p], q, tag)


def _sizeable(f: SemilinearSet) -> SemilinearSet:
    """Members of total multiplicity >= 2 (proper parallel compositions)."""
    if sl_is_empty(f):
        return f
    xs = tuple(f"x{i}" for i in range(f.dim))
    two = pb.le(pb.Lin(2, ()), pb.lin_make(0, [(x, 1) for x in xs]))
    return sl_intersect(f, pb.formula_to_sl(two, xs))


def linked_to_plain(a: BranchingAutomaton) -> BranchingAutomaton:
    """Language-preserving removal of links: the original fork/join
    transitions are dropped wholesale and the parallel path structure is
    rebuilt from the semilinear F-sets, which already respect the links."""
    if not a.links:
        return a
    pair_order, F = compute_F(a)
    coords = list(pair_order)
    states = list(a.states)
    seqs = list(a.seq)
    forks: list = []
    joins: list = []
    for pq in pair_order:
        s = _sizeable(F[pq])
        for i, part in enumerate(s.parts):
            _gadget_for_part(states, forks, joins, part, coords,
                             pq[0], pq[1], f"g.{pq[0]}.{pq[1]}.{i}")
    return prune(make_automaton(states, a.alphabet, seqs, forks, joins,
                                a.initial, a.final))


def intersect(a: BranchingAutomaton, b: BranchingAutomaton) -> BranchingAutomaton:
    """Product automaton for the intersection.

    Sequential steps synchronize pointwise; parallel structure is rebuilt
    from gadgets for the joint semilinear constraint "the A-projection of
    the branch pair multiset lies in F_A and the B-projection in F_B".
    """
    pa, Fa = compute_F(a)
    pob, Fb = compute_F(b)

    def pname(x, y):
        return f"{x}&{y}"

    states = [pname(x, y) for x in a.states for y in b.states]
    alphabet = sorted(set(a.alphabet) | set(b.alphabet))
    seqs = []
    for (p, l, q) in a.seq:
        for (p2, l2, q2) in b.seq:
            if l == l2:
                seqs.append((pname(p, p2), l, pname(q, q2)))
    forks: list = []
    joins: list = []
    gadget_count = itertools.count()
    sized_a = {pq: _sizeable(Fa[pq]) for pq in pa}
    sized_b = {pq: _sizeable(Fb[pq]) for pq in pob}

    def support(s: SemilinearSet, order) -> list:
        sup = set()
        for part in s.parts:
            vecs = [part.base] + list(part.periods)
            for v in vecs:
                for i, c in enumerate(v):
                    if c:
                        sup.add(order[i])
        return sorted(sup)

    for (p, q) in pa:
        sa = sized_a[(p, q)]
        if sl_is_empty(sa):
            continue
        for (p2, q2) in pob:
            sb = sized_b[(p2, q2)]
            if sl_is_empty(sb):
                continue
            supa = support(sa, pa)
            supb = support(sb, pob)
            coords = [((r, r2), (s, s2)) for (r, s) in supa for (r2, s2) in supb]
            xvars = [f"_c{i}" for i in range(len(coords))]

            def marginal(order, sup, side):
                terms = []
                for rs in order:
                    if rs not in sup:
                        terms.append(pb.Lin(0, ()))
                        continue
                    items = []
                    for i, ((r, r2), (s, s2)) in enumerate(coords):
                        if (side == 0 and (r, s) == rs) or \
                           (side == 1 and (r2, s2) == rs):
                            items.append((xvars[i], 1))
                    terms.append(pb.lin_make(0, items))
                return terms

            body = pb.conj([_member_formula(sa, marginal(list(pa), set(supa), 0)),
                            _member_formula(sb, marginal(list(pob), set(supb), 1))])
            joint = pb.formula_to_sl(body, tuple(xvars))
            coords_named = [(pname(r, r2), pname(s, s2))
                            for ((r, r2), (s, s2)) in coords]
            for part in joint.parts:
                _gadget_for_part(states, forks, joins, part, coords_named,
                                 pname(p, p2), pname(q, q2),
                                 f"x{next(gadget_count)}")
    aut = make_automaton(states, alphabet, seqs, forks, joins,
                         [pname(i, j) for i in a.initial for j in b.initial],
                         [pname(i, j) for i in a.final for j in b.final])
    return prune(aut)
