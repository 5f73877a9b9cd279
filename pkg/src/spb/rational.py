"""Rational sp-expressions: parsing, bounded enumeration semantics, the
iterated-substitution side condition, and compilation to branching automata.

Compilation is epsilon-free: gluing is done by mirroring transitions that
touch initial/final states, never by silent edges, which preserves the
fork/join multiset discipline.  The parallel iterations expand through the
iterated-substitution operator with a fresh variable; the empty poset only
exists as a nullability flag tracked by normalization.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .automata import BranchingAutomaton, make_automaton, rename_states
from .terms import Letter, Par, Seq, SpTerm, par, seq, term_key
from .posets import term_to_poset


class RexError(ValueError):
    pass


class StarXiViolation(RexError):
    pass


@dataclass(frozen=True)
class RationalExpr:
    pass


@dataclass(frozen=True)
class REmpty(RationalExpr):
    def __str__(self):
        return "0"


@dataclass(frozen=True)
class REps(RationalExpr):
    """Internal: the empty-poset language; eliminated by normalization."""

    def __str__(self):
        return "()"


@dataclass(frozen=True)
class RLetter(RationalExpr):
    a: str

    def __str__(self):
        return self.a


@dataclass(frozen=True)
class RUnion(RationalExpr):
    l: RationalExpr
    r: RationalExpr

    def __str__(self):
        return f"({self.l}|{self.r})"


@dataclass(frozen=True)
class RSeq(RationalExpr):
    l: RationalExpr
    r: RationalExpr

    def __str__(self):
        return f"({self.l}.{self.r})"


@dataclass(frozen=True)
class RPar(RationalExpr):
    l: RationalExpr
    r: RationalExpr

    def __str__(self):
        return f"({self.l}||{self.r})"


@dataclass(frozen=True)
class RSeqPlus(RationalExpr):
    e: RationalExpr

    def __str__(self):
        return f"{self.e}+"


@dataclass(frozen=True)
class RSeqStar(RationalExpr):
    e: RationalExpr

    def __str__(self):
        return f"{self.e}*"


@dataclass(frozen=True)
class RParPlus(RationalExpr):
    e: RationalExpr

    def __str__(self):
        return f"{self.e}(+)"


@dataclass(frozen=True)
class RParStar(RationalExpr):
    e: RationalExpr

    def __str__(self):
        return f"{self.e}(#)"


@dataclass(frozen=True)
class RSubst(RationalExpr):
    """repl o[xi] template: replace xi-elements of template members."""

    repl: RationalExpr
    xi: str
    template: RationalExpr

    def __str__(self):
        return f"({self.repl} o[{self.xi}] {self.template})"


@dataclass(frozen=True)
class RSubstStar(RationalExpr):
    e: RationalExpr
    xi: str

    def __str__(self):
        return f"{self.e}(*{self.xi})"


# --- parsing -----------------------------------------------------------------

_RTOK = re.compile(
    r"\s*(?:(\(\#\))|(\(\+\))|(\(\*[a-z][a-zA-Z0-9_]*\))|(o\[[a-z][a-zA-Z0-9_]*\])|"
    r"(\|\|)|(\|)|(\.)|(\+)|(\*)|(\()|(\))|(0)|([a-z][a-zA-Z0-9_]*))")


def _rtokens(text: str) -> list[str]:
    toks, pos = [], 0
    while pos < len(text):
        m = _RTOK.match(text, pos)
        if m is None or m.end() == pos:
            if not text[pos:].strip():
                break
            raise RexError(f"bad token at {pos}: {text[pos:pos+8]!r}")
        toks.append(next(g for g in m.groups() if g is not None))
        pos = m.end()
    return toks


class _RParser:
    def __init__(self, text: str):
        self.toks = _rtokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def eat(self, tok=None):
        if self.i >= len(self.toks):
            raise RexError("unexpected end of expression")
        t = self.toks[self.i]
        if tok is not None and t != tok:
            raise RexError(f"expected {tok!r}, got {t!r}")
        self.i += 1
        return t

    def parse(self):
        e = self.union()
        if self.i != len(self.toks):
            raise RexError(f"trailing input {self.toks[self.i:]!r}")
        return e

    def union(self):
        e = self.subst()
        while self.peek() == "|":
            self.eat()
            e = RUnion(e, self.subst())
        return e

    def subst(self):
        e = self.parprod()
        while self.peek() is not None and self.peek().startswith("o["):
            xi = self.eat()[2:-1]
            e = RSubst(e, xi, self.parprod())
        return e

    def parprod(self):
        e = self.seqprod()
        while self.peek() == "||":
            self.eat()
            e = RPar(e, self.seqprod())
        return e

    def seqprod(self):
        e = self.postfix()
        while self.peek() == ".":
            self.eat()
            e = RSeq(e, self.postfix())
        return e

    def postfix(self):
        e = self.atom()
        while True:
            t = self.peek()
            if t == "+":
                self.eat()
                e = RSeqPlus(e)
            elif t == "*":
                self.eat()
                e = RSeqStar(e)
            elif t == "(+)":
                self.eat()
                e = RParPlus(e)
            elif t == "(#)":
                self.eat()
                e = RParStar(e)
            elif t is not None and t.startswith("(*"):
                self.eat()
                e = RSubstStar(e, t[2:-1])
            else:
                return e

    def atom(self):
        t = self.eat()
        if t == "0":
            return REmpty()
        if t == "(":
            e = self.union()
            self.eat(")")
            return e
        if re.fullmatch(r"[a-z][a-zA-Z0-9_]*", t):
            return RLetter(t)
        raise RexError(f"unexpected token {t!r}")


def parse_rex(text: str) -> RationalExpr:
    return _RParser(text).parse()


# --- normalization: (core, nullable) with epsilon-free cores -------------------


def letters_of_expr(e: RationalExpr) -> set[str]:
    if isinstance(e, RLetter):
        return {e.a}
    if isinstance(e, (REmpty, REps)):
        return set()
    if isinstance(e, (RUnion, RSeq, RPar)):
        return letters_of_expr(e.l) | letters_of_expr(e.r)
    if isinstance(e, (RSeqPlus, RSeqStar, RParPlus, RParStar)):
        return letters_of_expr(e.e)
    if isinstance(e, RSubst):
        return letters_of_expr(e.repl) | (letters_of_expr(e.template) - {e.xi})
    if isinstance(e, RSubstStar):
        return letters_of_expr(e.e)
    raise RexError(f"unknown node {e!r}")


def normalize(e: RationalExpr) -> tuple[RationalExpr | None, bool]:
    """Return (core, nullable): core never denotes the empty poset and is
    None when the expression denotes at most the empty poset."""
    if isinstance(e, REmpty):
        return None, False
    if isinstance(e, REps):
        return None, True
    if isinstance(e, RLetter):
        return e, False
    if isinstance(e, RUnion):
        cl, nl = normalize(e.l)
        cr, nr = normalize(e.r)
        if cl is None:
            return cr, nl or nr
        if cr is None:
            return cl, nl or nr
        return RUnion(cl, cr), nl or nr
    if isinstance(e, (RSeq, RPar)):
        mk = RSeq if isinstance(e, RSeq) else RPar
        cl, nl = normalize(e.l)
        cr, nr = normalize(e.r)
        pieces = []
        if cl is not None and cr is not None:
            pieces.append(mk(cl, cr))
        if cl is not None and nr:
            pieces.append(cl)
        if cr is not None and nl:
            pieces.append(cr)
        core = None
        for p in pieces:
            core = p if core is None else RUnion(core, p)
        return core, nl and nr
    if isinstance(e, (RSeqPlus, RSeqStar)):
        c, n = normalize(e.e)
        core = RSeqPlus(c) if c is not None else None
        return core, n or isinstance(e, RSeqStar)
    if isinstance(e, (RParPlus, RParStar)):
        c, n = normalize(e.e)
        core = RParPlus(c) if c is not None else None
        return core, n or isinstance(e, RParStar)
    if isinstance(e, RSubst):
        crepl, nrepl = normalize(e.repl)
        tmpl = e.template
        if nrepl:
            tmpl = _optionalize(tmpl, e.xi)
        ctm, ntm = normalize(tmpl)
        if ctm is None:
            return None, ntm
        if crepl is None and not _expr_uses_letter(ctm, e.xi):
            return ctm, ntm
        return RSubst(crepl if crepl is not None else REmpty(), e.xi, ctm), ntm
    if isinstance(e, RSubstStar):
        c, n = normalize(e.e)
        if n:
            c2 = _optionalize(e.e, e.xi)
            c, _ = normalize(c2)
        if c is None:
            # iteration of (at most epsilon): just the bare variable
            return RLetter(e.xi), n
        return RSubstStar(c, e.xi), n
    raise RexError(f"unknown node {e!r}")


def _expr_uses_letter(e: RationalExpr, xi: str) -> bool:
    if isinstance(e, RLetter):
        return e.a == xi
    if isinstance(e, (REmpty, REps)):
        return False
    if isinstance(e, (RUnion, RSeq, RPar)):
        return _expr_uses_letter(e.l, xi) or _expr_uses_letter(e.r, xi)
    if isinstance(e, (RSeqPlus, RSeqStar, RParPlus, RParStar)):
        return _expr_uses_letter(e.e, xi)
    if isinstance(e, RSubst):
        return _expr_uses_letter(e.repl, xi) or (xi != e.xi and _expr_uses_letter(e.template, xi))
    if isinstance(e, RSubstStar):
        return _expr_uses_letter(e.e, xi)
    raise RexError(f"unknown node {e!r}")


def _optionalize(e: RationalExpr, xi: str) -> RationalExpr:
    """Rewrite so every xi leaf may also produce the empty poset."""
    if isinstance(e, RLetter):
        return RUnion(e, REps()) if e.a == xi else e
    if isinstance(e, (REmpty, REps)):
        return e
    if isinstance(e, (RUnion, RSeq, RPar)):
        return type(e)(_optionalize(e.l, xi), _optionalize(e.r, xi))
    if isinstance(e, (RSeqPlus, RSeqStar, RParPlus, RParStar)):
        return type(e)(_optionalize(e.e, xi))
    if isinstance(e, RSubst):
        repl = _optionalize(e.repl, xi)
        tmpl = e.template if e.xi == xi else _optionalize(e.template, xi)
        return RSubst(repl, e.xi, tmpl)
    if isinstance(e, RSubstStar):
        if e.xi == xi:
            raise RexError(
                "empty-poset replacement into an iterated substitution variable")
        return RSubstStar(_optionalize(e.e, xi), e.xi)
    raise RexError(f"unknown node {e!r}")


# --- bounded enumeration semantics ---------------------------------------------


def _subst_all(t: SpTerm, xi: str, choices: list[SpTerm], allow_delete: bool,
               max_size: int) -> tuple[set[SpTerm], bool]:
    """All ways to replace each xi leaf independently; returns (terms, got_eps)."""
    opts: list[SpTerm | None] = list(choices)
    if allow_delete:
        opts.append(None)

    def walk(u: SpTerm) -> list[SpTerm | None]:
        if isinstance(u, Letter):
            if u.symbol != xi:
                return [u]
            return list(opts)
        outs: list[SpTerm | None] = []
        child_lists = [walk(c) for c in u.children]  # type: ignore[union-attr]
        mk = seq if isinstance(u, Seq) else par
        for combo in itertools.product(*child_lists):
            kids = [c for c in combo if c is not None]
            if not kids:
                outs.append(None)
                continue
            v = mk(*kids) if len(kids) > 1 else kids[0]
            if v.size <= max_size:
                outs.append(v)
        # dedupe
        seen: set = set()
        res: list[SpTerm | None] = []
        for o in outs:
            k = o if o is not None else "<eps>"
            if k not in seen:
                seen.add(k)
                res.append(o)
        return res

    results = walk(t)
    terms = {r for r in results if r is not None}
    return terms, None in results


def _enum(core: RationalExpr | None, nullable: bool, n: int) -> tuple[set[SpTerm], bool]:
    if core is None:
        return set(), nullable
    return _enum_core(core, n), nullable


def _enum_core(e: RationalExpr, n: int) -> set[SpTerm]:
    if isinstance(e, RLetter):
        return {Letter(e.a)} if n >= 1 else set()
    if isinstance(e, RUnion):
        return _enum_core(e.l, n) | _enum_core(e.r, n)
    if isinstance(e, (RSeq, RPar)):
        mk = seq if isinstance(e, RSeq) else par
        ls = _enum_core(e.l, n - 1)
        rs = _enum_core(e.r, n - 1)
        return {mk(x, y) for x in ls for y in rs if x.size + y.size <= n}
    if isinstance(e, (RSeqPlus, RParPlus)):
        mk = seq if isinstance(e, RSeqPlus) else par
        base = _enum_core(e.e, n)
        acc = set(base)
        frontier = set(base)
        while frontier:
            nxt = {mk(x, y) for x in frontier for y in base
                   if x.size + y.size <= n}
            nxt -= acc
            acc |= nxt
            frontier = nxt
        return acc
    if isinstance(e, RSubst):
        crepl, nrepl = normalize(e.repl)
        choices = sorted(_enum_core(crepl, n), key=term_key) if crepl is not None else []
        budget = n if not nrepl else 2 * n + 2
        out: set[SpTerm] = set()
        for t in _enum_core(e.template, budget):
            terms, _eps = _subst_all(t, e.xi, choices, nrepl, n)
            out |= terms
        return {t for t in out if t.size <= n}
    if isinstance(e, RSubstStar):
        base = _enum_core(e.e, n)
        acc: set[SpTerm] = {Letter(e.xi)}
        while True:
            choices = sorted(acc, key=term_key)
            new: set[SpTerm] = set()
            for t in base:
                terms, _eps = _subst_all(t, e.xi, choices, False, n)
                new |= terms
            if new <= acc:
                return acc | base
            acc |= new
    raise RexError(f"cannot enumerate node {e!r}")


def rex_enumerate(e: RationalExpr, max_size: int) -> set[SpTerm]:
    """The members of the denoted language of size <= max_size.

    The empty poset, when denoted, is not a term and is simply not listed.
    """
    if max_size < 1:
        raise RexError("max_size must be >= 1")
    core, nullable = normalize(e)
    terms, _ = _enum(core, nullable, max_size)
    return {t for t in terms if t.size <= max_size}


def rex_nullable(e: RationalExpr) -> bool:
    return normalize(e)[1]


# --- the *xi side condition ------------------------------------------------------


def _syntactic_star_ok(e: RationalExpr, xi: str, under_good_par: bool = False) -> bool:
    """Every xi occurrence sits under a parallel product with a sibling that
    cannot denote the empty poset."""
    if isinstance(e, RLetter):
        return e.a != xi or under_good_par
    if isinstance(e, (REmpty, REps)):
        return True
    if isinstance(e, RUnion):
        return (_syntactic_star_ok(e.l, xi, under_good_par)
                and _syntactic_star_ok(e.r, xi, under_good_par))
    if isinstance(e, RSeq):
        return (_syntactic_star_ok(e.l, xi, under_good_par)
                and _syntactic_star_ok(e.r, xi, under_good_par))
    if isinstance(e, RPar):
        lgood = under_good_par or not rex_nullable(e.r)
        rgood = under_good_par or not rex_nullable(e.l)
        return (_syntactic_star_ok(e.l, xi, lgood)
                and _syntactic_star_ok(e.r, xi, rgood))
    if isinstance(e, (RSeqPlus, RSeqStar)):
        return _syntactic_star_ok(e.e, xi, under_good_par)
    if isinstance(e, (RParPlus, RParStar)):
        return _syntactic_star_ok(e.e, xi, under_good_par)
    if isinstance(e, RSubst):
        # xi leaves may come from the replacement, or survive in the template
        ok_repl = _syntactic_star_ok(e.repl, xi, False)
        ok_tmpl = e.xi == xi or _syntactic_star_ok(e.template, xi, False)
        return ok_repl and ok_tmpl
    if isinstance(e, RSubstStar):
        return _syntactic_star_ok(e.e, xi, False)
    raise RexError(f"unknown node {e!r}")


def rex_check_star_xi(e: RationalExpr, xi: str, bound: int = 5) -> tuple[str, SpTerm | None]:
    """Check the side condition of the iterated substitution on e's members.

    Returns ('ok', None), ('violated', witness) or ('unknown', None).
    """
    if bound < 1:
        raise RexError("bound must be >= 1")
    for t in sorted(rex_enumerate(e, bound), key=term_key):
        p = term_to_poset(t)
        for i, lab in enumerate(p.labels):
            if lab != xi:
                continue
            if not any(j != i and not p.comparable(i, j) for j in range(p.n)):
                return "violated", t
    core, nullable = normalize(e)
    if core is not None and _syntactic_star_ok(core, xi):
        return "ok", None
    if core is None:
        return "ok", None
    return "unknown", None


def check_all_star_xi(e: RationalExpr, bound: int = 5) -> None:
    """Raise unless every iterated-substitution subterm passes the check."""
    if isinstance(e, (REmpty, REps, RLetter)):
        return
    if isinstance(e, (RUnion, RSeq, RPar)):
        check_all_star_xi(e.l, bound)
        check_all_star_xi(e.r, bound)
        return
    if isinstance(e, (RSeqPlus, RSeqStar, RParPlus, RParStar)):
        check_all_star_xi(e.e, bound)
        return
    if isinstance(e, RSubst):
        check_all_star_xi(e.repl, bound)
        check_all_star_xi(e.template, bound)
        return
    if isinstance(e, RSubstStar):
        check_all_star_xi(e.e, bound)
        status, witness = rex_check_star_xi(e.e, e.xi, bound)
        if status == "violated":
            raise StarXiViolation(
                f"iterated substitution over {e.xi} violated by {witness}")
        if status == "unknown":
            raise StarXiViolation(
                f"iterated substitution over {e.xi}: side condition undecided "
                f"up to bound {bound}")
        return
    raise RexError(f"unknown node {e!r}")


# --- compilation -------------------------------------------------------------------


_fresh_counter = itertools.count()


def _fresh(prefix: str) -> str:
    return f"{prefix}{next(_fresh_counter)}"


def _letter_aut(a: str) -> BranchingAutomaton:
    i, f = _fresh("i"), _fresh("f")
    return make_automaton([i, f], [a], [(i, a, f)], [], [], [i], [f])


def _mirror_final_to(a: BranchingAutomaton, targets: list[str]) -> tuple[list, list, list]:
    """Copies of transitions into final states, retargeted at each target."""
    seq_extra, join_extra, join_orig = [], [], []
    for (p, l, q) in a.seq:
        if q in a.final:
            for t in targets:
                seq_extra.append((p, l, t))
    for ji, (br, q) in enumerate(a.joins):
        if q in a.final:
            for t in targets:
                join_extra.append((br, t))
                join_orig.append(ji)
    return seq_extra, join_extra, join_orig


def _concat(a1: BranchingAutomaton, a2: BranchingAutomaton) -> BranchingAutomaton:
    b1 = rename_states(a1, lambda s: f"l.{s}")
    b2 = rename_states(a2, lambda s: f"r.{s}")
    seq_extra, join_extra, join_orig = _mirror_final_to(b1, sorted(b2.initial))
    joins = list(b1.joins) + [(br, t) for (br, t) in join_extra] + list(b2.joins)
    # link bookkeeping: mirrored joins inherit their original's links
    nb1 = len(b1.joins)
    nmir = len(join_extra)
    links = set(b1.links)
    for k, oji in enumerate(join_orig):
        for (fi, ji) in b1.links:
            if ji == oji:
                links.add((fi, nb1 + k))
    links |= {(fi + len(b1.forks), ji + nb1 + nmir) for (fi, ji) in b2.links}
    return make_automaton(
        b1.states + b2.states,
        set(b1.alphabet) | set(b2.alphabet),
        list(b1.seq) + seq_extra + list(b2.seq),
        list(b1.forks) + list(b2.forks),
        joins,
        b1.initial, b2.final, links)


def _plus(a: BranchingAutomaton) -> BranchingAutomaton:
    seq_extra, join_extra, join_orig = _mirror_final_to(a, sorted(a.initial))
    joins = list(a.joins) + join_extra
    links = set(a.links)
    for k, oji in enumerate(join_orig):
        for (fi, ji) in a.links:
            if ji == oji:
                links.add((fi, len(a.joins) + k))
    return make_automaton(
        a.states, a.alphabet,
        list(a.seq) + seq_extra,
        a.forks, joins, a.initial, a.final, links)


def _parallel(a1: BranchingAutomaton, a2: BranchingAutomaton) -> BranchingAutomaton:
    b1 = rename_states(a1, lambda s: f"l.{s}")
    b2 = rename_states(a2, lambda s: f"r.{s}")
    s, t = _fresh("s"), _fresh("t")
    forks = list(b1.forks) + list(b2.forks)
    joins = list(b1.joins) + list(b2.joins)
    links = set(b1.links) | {(fi + len(b1.forks), ji + len(b1.joins))
                             for (fi, ji) in b2.links}
    for i1 in sorted(b1.initial):
        for i2 in sorted(b2.initial):
            forks.append((s, [i1, i2]))
    for f1 in sorted(b1.final):
        for f2 in sorted(b2.final):
            joins.append(([f1, f2], t))
    return make_automaton(
        [s, t] + list(b1.states) + list(b2.states),
        set(b1.alphabet) | set(b2.alphabet),
        set(b1.seq) | set(b2.seq),
        forks, joins, [s], [t], links)


def _splice_copy(host_states, host_alphabet, host_seq, host_forks, host_joins,
                 host_links, repl: BranchingAutomaton, p: str, q: str,
                 tag: str) -> None:
    """Add a fresh copy of repl gluing its runs between host states p and q."""
    r = rename_states(repl, lambda s: f"{tag}.{s}")
    host_states.extend(r.states)
    host_alphabet.update(r.alphabet)
    fork_off = len(host_forks)
    join_off = len(host_joins)
    fork_ids: dict[int, list[int]] = {}
    join_ids: dict[int, list[int]] = {}
    for (s, l, d) in sorted(r.seq):
        variants_s = [s] + ([p] if s in r.initial else [])
        variants_d = [d] + ([q] if d in r.final else [])
        for vs in variants_s:
            for vd in variants_d:
                host_seq.append((vs, l, vd))
    for fi, (o, br) in enumerate(r.forks):
        ids = []
        for vo in [o] + ([p] if o in r.initial else []):
            ids.append(len(host_forks))
            host_forks.append((vo, br))
        fork_ids[fi] = ids
    for ji, (br, d) in enumerate(r.joins):
        ids = []
        for vd in [d] + ([q] if d in r.final else []):
            ids.append(len(host_joins))
            host_joins.append((br, vd))
        join_ids[ji] = ids
    for (fi, ji) in r.links:
        for nfi in fork_ids[fi]:
            for nji in join_ids[ji]:
                host_links.add((nfi, nji))


def _substitute(template: BranchingAutomaton, xi: str,
                repl: BranchingAutomaton | None) -> BranchingAutomaton:
    """Replace xi transitions by copies of repl (None deletes them)."""
    xis = sorted((p, q) for (p, l, q) in template.seq if l == xi)
    states = list(template.states)
    alphabet = set(template.alphabet) - {xi}
    seqs = [(p, l, q) for (p, l, q) in template.seq if l != xi]
    forks = list(template.forks)
    joins = list(template.joins)
    links = set(template.links)
    if repl is not None:
        for k, (p, q) in enumerate(xis):
            _splice_copy(states, alphabet, seqs, forks, joins, links,
                         repl, p, q, _fresh("c"))
    if not alphabet:
        alphabet = {xi}  # keep a nonempty alphabet for degenerate cases
    return make_automaton(states, alphabet, seqs, forks, joins,
                          template.initial, template.final, links)


def _substar(a: BranchingAutomaton, xi: str) -> BranchingAutomaton:
    """The iterated substitution: rewire xi transitions back into the same
    automaton's entry/exit mirrors, keep xi readable, add the bare-xi poset."""
    xis = sorted((p, q) for (p, l, q) in a.seq if l == xi)
    states = list(a.states)
    seqs = list(a.seq)
    forks = list(a.forks)
    joins = list(a.joins)
    links = set(a.links)
    for (p, q) in xis:
        # out-of-initial mirrored to start at p, into-final mirrored to end at q
        for (s, l, d) in sorted(a.seq):
            vs = [s] + ([p] if s in a.initial else [])
            vd = [d] + ([q] if d in a.final else [])
            for s2 in vs:
                for d2 in vd:
                    if (s2, d2) != (s, d):
                        seqs.append((s2, l, d2))
        for fi, (o, br) in enumerate(a.forks):
            if o in a.initial:
                nfi = len(forks)
                forks.append((p, br))
                for (fi2, ji2) in a.links:
                    if fi2 == fi:
                        links.add((nfi, ji2))
        for ji, (br, d) in enumerate(a.joins):
            if d in a.final:
                nji = len(joins)
                joins.append((br, q))
                for (fi2, ji2) in a.links:
                    if ji2 == ji:
                        links.add((fi2, nji))
    i0, f0 = _fresh("xs"), _fresh("xf")
    states += [i0, f0]
    seqs.append((i0, xi, f0))
    return make_automaton(states, set(a.alphabet) | {xi}, seqs, forks, joins,
                          set(a.initial) | {i0}, set(a.final) | {f0}, links)


def _compile_core(e: RationalExpr) -> BranchingAutomaton:
    if isinstance(e, RLetter):
        return _letter_aut(e.a)
    if isinstance(e, RUnion):
        from .automata import union
        return union(_compile_core(e.l), _compile_core(e.r))
    if isinstance(e, RSeq):
        return _concat(_compile_core(e.l), _compile_core(e.r))
    if isinstance(e, RPar):
        return _parallel(_compile_core(e.l), _compile_core(e.r))
    if isinstance(e, RSeqPlus):
        return _plus(_compile_core(e.e))
    if isinstance(e, RParPlus):
        # least solution of X = e | e || X, via the iterated substitution
        xi = _fresh("_px")
        inner = RUnion(e.e, RPar(e.e, RLetter(xi)))
        aut = _substar(_compile_core(inner), xi)
        return _substitute(aut, xi, None)
    if isinstance(e, RSubst):
        template = _compile_core(e.template)
        if isinstance(e.repl, REmpty):
            return _substitute(template, e.xi, None)
        return _substitute(template, e.xi, _compile_core(e.repl))
    if isinstance(e, RSubstStar):
        return _substar(_compile_core(e.e), e.xi)
    raise RexError(f"cannot compile node {e!r}")


def rex_compile(e: RationalExpr, star_bound: int = 5,
                check_star: bool = True) -> BranchingAutomaton:
    """Compile to a branching automaton accepting exactly the denotation.

    The expression must not denote the empty poset (SP+ automata cannot
    accept it); iterated substitutions must pass the side-condition check.
    """
    core, nullable = normalize(e)
    if nullable:
        raise RexError("expression denotes the empty poset; "
                       "SP+ automata accept nonempty posets only")
    if core is None:
        i = _fresh("i")
        letters = letters_of_expr(e) or {"a"}
        return make_automaton([i], sorted(letters), [], [], [], [i], [])
    if check_star:
        check_all_star_xi(core, star_bound)
    return _compile_core(core)


def solve_language_equation(body: RationalExpr, xi: str) -> BranchingAutomaton:
    """Automaton for the least solution of X = body(X), the recursion variable
    appearing as the letter xi; used by the parallel-iteration expansions."""
    return _substitute(_substar(_compile_core(body), xi), xi, None)
