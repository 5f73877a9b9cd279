"""Presburger arithmetic over the naturals.

Evaluation, satisfiability, Cooper-style quantifier elimination (performed
over the integers with explicit nonnegativity guards), and the two-way
bridge with semilinear sets: quantifier-free or purely existential formulas
are solved per DNF conjunct with a Hilbert-basis computation and projected;
everything else is eliminated first.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import lru_cache
from math import gcd, lcm
from typing import Iterable, Sequence

from .hilbert import solve_system
from .semilinear import LinearSet, SemilinearSet, Vec


class PresburgerError(ValueError):
    pass


# --- linear terms ------------------------------------------------------------


@dataclass(frozen=True)
class Lin:
    """const + sum of coef*var, coeffs sorted with no zero entries."""

    const: int
    coeffs: tuple[tuple[str, int], ...]

    def __str__(self) -> str:
        bits = [f"{c}*{v}" for v, c in self.coeffs]
        bits.append(str(self.const))
        return " + ".join(bits)


def lin(const: int = 0, **coeffs: int) -> Lin:
    return lin_make(const, coeffs.items())


def lin_make(const: int, items: Iterable[tuple[str, int]]) -> Lin:
    acc: dict[str, int] = {}
    for v, c in items:
        acc[v] = acc.get(v, 0) + c
    return Lin(const, tuple(sorted((v, c) for v, c in acc.items() if c)))


def lin_var(v: str, c: int = 1) -> Lin:
    return lin_make(0, [(v, c)])


def lin_add(a: Lin, b: Lin) -> Lin:
    return lin_make(a.const + b.const, list(a.coeffs) + list(b.coeffs))


def lin_scale(a: Lin, k: int) -> Lin:
    return lin_make(a.const * k, [(v, c * k) for v, c in a.coeffs])


def lin_sub(a: Lin, b: Lin) -> Lin:
    return lin_add(a, lin_scale(b, -1))


def lin_coeff(a: Lin, v: str) -> int:
    for w, c in a.coeffs:
        if w == v:
            return c
    return 0


def lin_drop(a: Lin, v: str) -> Lin:
    return Lin(a.const, tuple((w, c) for w, c in a.coeffs if w != v))


def lin_eval(a: Lin, env: dict[str, int]) -> int:
    try:
        return a.const + sum(c * env[v] for v, c in a.coeffs)
    except KeyError as e:
        raise PresburgerError(f"unbound variable {e.args[0]}") from None


# --- formulas ----------------------------------------------------------------


@dataclass(frozen=True)
class Formula:
    def free_vars(self) -> frozenset[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class TrueF(Formula):
    def free_vars(self):
        return frozenset()


@dataclass(frozen=True)
class FalseF(Formula):
    def free_vars(self):
        return frozenset()


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True)
class Le(Formula):
    """term <= 0"""
    t: Lin

    def free_vars(self):
        return frozenset(v for v, _ in self.t.coeffs)


@dataclass(frozen=True)
class Eq(Formula):
    """term = 0"""
    t: Lin

    def free_vars(self):
        return frozenset(v for v, _ in self.t.coeffs)


@dataclass(frozen=True)
class Dvd(Formula):
    """d | term"""
    d: int
    t: Lin

    def free_vars(self):
        return frozenset(v for v, _ in self.t.coeffs)


@dataclass(frozen=True)
class NDvd(Formula):
    d: int
    t: Lin

    def free_vars(self):
        return frozenset(v for v, _ in self.t.coeffs)


@dataclass(frozen=True)
class And(Formula):
    args: tuple[Formula, ...]

    def free_vars(self):
        return frozenset().union(*(a.free_vars() for a in self.args)) if self.args else frozenset()


@dataclass(frozen=True)
class Or(Formula):
    args: tuple[Formula, ...]

    def free_vars(self):
        return frozenset().union(*(a.free_vars() for a in self.args)) if self.args else frozenset()


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def free_vars(self):
        return self.arg.free_vars()


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    arg: Formula

    def free_vars(self):
        return self.arg.free_vars() - {self.var}


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    arg: Formula

    def free_vars(self):
        return self.arg.free_vars() - {self.var}


def conj(args: Sequence[Formula]) -> Formula:
    flat: list[Formula] = []
    for a in args:
        if isinstance(a, TrueF):
            continue
        if isinstance(a, FalseF):
            return FALSE
        if isinstance(a, And):
            flat.extend(a.args)
        else:
            flat.append(a)
    flat = list(dict.fromkeys(flat))
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(args: Sequence[Formula]) -> Formula:
    flat: list[Formula] = []
    for a in args:
        if isinstance(a, FalseF):
            continue
        if isinstance(a, TrueF):
            return TRUE
        if isinstance(a, Or):
            flat.extend(a.args)
        else:
            flat.append(a)
    flat = list(dict.fromkeys(flat))
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(a: Formula) -> Formula:
    if isinstance(a, TrueF):
        return FALSE
    if isinstance(a, FalseF):
        return TRUE
    if isinstance(a, Not):
        return a.arg
    return Not(a)


def le(a: Lin, b: Lin) -> Formula:
    return _simp_atom(Le(lin_sub(a, b)))


def lt(a: Lin, b: Lin) -> Formula:
    return _simp_atom(Le(lin_add(lin_sub(a, b), Lin(1, ()))))


def eq(a: Lin, b: Lin) -> Formula:
    return _simp_atom(Eq(lin_sub(a, b)))


def dvd(d: int, t: Lin) -> Formula:
    return _simp_atom(Dvd(d, t))


def _simp_atom(a: Formula) -> Formula:
    """Constant folding and gcd normalization of a single atom."""
    if isinstance(a, Le):
        if not a.t.coeffs:
            return TRUE if a.t.const <= 0 else FALSE
        g = gcd(*(abs(c) for _, c in a.t.coeffs))
        if g > 1:
            # sum g*ai*xi + c <= 0  <=>  sum ai*xi + ceil(c/g) <= 0
            c = -((-a.t.const) // g)
            return Le(Lin(c, tuple((v, cc // g) for v, cc in a.t.coeffs)))
        return a
    if isinstance(a, Eq):
        if not a.t.coeffs:
            return TRUE if a.t.const == 0 else FALSE
        g = gcd(*(abs(c) for _, c in a.t.coeffs))
        if a.t.const % g:
            return FALSE
        if g > 1:
            return Eq(Lin(a.t.const // g, tuple((v, cc // g) for v, cc in a.t.coeffs)))
        return a
    if isinstance(a, (Dvd, NDvd)):
        d = abs(a.d)
        if d == 0:
            inner = Eq(a.t)
            return _simp_atom(inner) if isinstance(a, Dvd) else neg(_simp_atom(inner))
        t = lin_make(a.t.const % d, [(v, c % d) for v, c in a.t.coeffs])
        if not t.coeffs:
            holds = t.const % d == 0
            if isinstance(a, Dvd):
                return TRUE if holds else FALSE
            return FALSE if holds else TRUE
        if d == 1:
            return TRUE if isinstance(a, Dvd) else FALSE
        return Dvd(d, t) if isinstance(a, Dvd) else NDvd(d, t)
    return a


# --- evaluation ---------------------------------------------------------------


def evaluate_qf(f: Formula, env: dict[str, int]) -> bool:
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Le):
        return lin_eval(f.t, env) <= 0
    if isinstance(f, Eq):
        return lin_eval(f.t, env) == 0
    if isinstance(f, Dvd):
        return lin_eval(f.t, env) % f.d == 0
    if isinstance(f, NDvd):
        return lin_eval(f.t, env) % f.d != 0
    if isinstance(f, And):
        return all(evaluate_qf(a, env) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate_qf(a, env) for a in f.args)
    if isinstance(f, Not):
        return not evaluate_qf(f.arg, env)
    raise PresburgerError(f"formula is not quantifier-free: {type(f).__name__}")


def pres_eval(f: Formula, env: dict[str, int]) -> bool:
    """First-order semantics over N; quantifiers go through elimination."""
    missing = f.free_vars() - set(env)
    if missing:
        raise PresburgerError(f"unbound variables: {sorted(missing)}")
    return evaluate_qf(pres_qe(f), env)


# --- NNF ----------------------------------------------------------------------


def nnf(f: Formula, negated: bool = False) -> Formula:
    if isinstance(f, TrueF):
        return FALSE if negated else TRUE
    if isinstance(f, FalseF):
        return TRUE if negated else FALSE
    if isinstance(f, Not):
        return nnf(f.arg, not negated)
    if isinstance(f, And):
        parts = [nnf(a, negated) for a in f.args]
        return disj(parts) if negated else conj(parts)
    if isinstance(f, Or):
        parts = [nnf(a, negated) for a in f.args]
        return conj(parts) if negated else disj(parts)
    if isinstance(f, Exists):
        inner = nnf(f.arg, negated)
        return Forall(f.var, inner) if negated else Exists(f.var, inner)
    if isinstance(f, Forall):
        inner = nnf(f.arg, negated)
        return Exists(f.var, inner) if negated else Forall(f.var, inner)
    if not negated:
        return _simp_atom(f)
    if isinstance(f, Le):
        # not(t <= 0)  <=>  -t + 1 <= 0
        return _simp_atom(Le(lin_add(lin_scale(f.t, -1), Lin(1, ()))))
    if isinstance(f, Eq):
        return disj([_simp_atom(Le(lin_add(f.t, Lin(1, ())))),
                     _simp_atom(Le(lin_add(lin_scale(f.t, -1), Lin(1, ()))))])
    if isinstance(f, Dvd):
        return _simp_atom(NDvd(f.d, f.t))
    if isinstance(f, NDvd):
        return _simp_atom(Dvd(f.d, f.t))
    raise PresburgerError(f"unexpected node {type(f).__name__}")


# --- Cooper elimination ---------------------------------------------------------


def _subst(f: Formula, v: str, t: Lin) -> Formula:
    """Substitute v := t in a QF formula."""
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, (Le, Eq)):
        c = lin_coeff(f.t, v)
        if not c:
            return f
        new = lin_add(lin_drop(f.t, v), lin_scale(t, c))
        return _simp_atom(type(f)(new))
    if isinstance(f, (Dvd, NDvd)):
        c = lin_coeff(f.t, v)
        if not c:
            return f
        new = lin_add(lin_drop(f.t, v), lin_scale(t, c))
        return _simp_atom(type(f)(f.d, new))
    if isinstance(f, And):
        return conj([_subst(a, v, t) for a in f.args])
    if isinstance(f, Or):
        return disj([_subst(a, v, t) for a in f.args])
    raise PresburgerError("substitution expects a quantifier-free NNF formula")


def _cooper(v: str, f: Formula) -> Formula:
    """Eliminate an integer-valued exists v from QF NNF f (Cooper)."""
    # scale v's coefficient to +-delta, then set y = delta*v
    coefs: set[int] = set()

    def collect(g: Formula):
        if isinstance(g, (Le, Eq, Dvd, NDvd)):
            c = lin_coeff(g.t, v)
            if c:
                coefs.add(abs(c))
        elif isinstance(g, (And, Or)):
            for a in g.args:
                collect(a)

    collect(f)
    if not coefs:
        return f
    delta = lcm(*coefs)

    def scale(g: Formula) -> Formula:
        if isinstance(g, (Le, Eq)):
            c = lin_coeff(g.t, v)
            if not c:
                return g
            k = delta // abs(c)
            t = lin_scale(g.t, k)
            return type(g)(t)
        if isinstance(g, (Dvd, NDvd)):
            c = lin_coeff(g.t, v)
            if not c:
                return g
            k = delta // abs(c)
            return type(g)(g.d * k, lin_scale(g.t, k))
        if isinstance(g, And):
            return conj([scale(a) for a in g.args])
        if isinstance(g, Or):
            return disj([scale(a) for a in g.args])
        return g

    f = scale(f)
    if delta > 1:
        f = conj([f, Dvd(delta, lin_var(v))])

    # now every occurrence of v has coefficient +-delta; treat y = delta*v as
    # a fresh unit-coefficient variable (we reuse the name v, unit coeff)
    def unitize(g: Formula) -> Formula:
        if isinstance(g, (Le, Eq)):
            c = lin_coeff(g.t, v)
            if not c:
                return g
            rest = lin_drop(g.t, v)
            return type(g)(lin_add(lin_var(v, 1 if c > 0 else -1), rest))
        if isinstance(g, (Dvd, NDvd)):
            c = lin_coeff(g.t, v)
            if not c:
                return g
            rest = lin_drop(g.t, v)
            return type(g)(g.d, lin_add(lin_var(v, 1 if c > 0 else -1), rest))
        if isinstance(g, And):
            return conj([unitize(g2) for g2 in g.args])
        if isinstance(g, Or):
            return disj([unitize(g2) for g2 in g.args])
        return g

    f = unitize(f)
    # equalities split into two inequalities for the bound analysis
    def split_eq(g: Formula) -> Formula:
        if isinstance(g, Eq) and lin_coeff(g.t, v):
            return conj([Le(g.t), Le(lin_scale(g.t, -1))])
        if isinstance(g, And):
            return conj([split_eq(a) for a in g.args])
        if isinstance(g, Or):
            return disj([split_eq(a) for a in g.args])
        return g

    f = split_eq(f)

    lowers: list[Lin] = []
    uppers: list[Lin] = []
    divisors: set[int] = {1}

    def analyze(g: Formula):
        if isinstance(g, Le):
            c = lin_coeff(g.t, v)
            if c == 1:
                uppers.append(lin_scale(lin_drop(g.t, v), -1))  # v <= -rest
            elif c == -1:
                lowers.append(lin_drop(g.t, v))  # v >= rest
        elif isinstance(g, (Dvd, NDvd)):
            if lin_coeff(g.t, v):
                divisors.add(g.d)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                analyze(a)

    analyze(f)
    big_d = lcm(*divisors)

    def minus_inf(g: Formula) -> Formula:
        if isinstance(g, Le):
            c = lin_coeff(g.t, v)
            if c == 1:
                return TRUE
            if c == -1:
                return FALSE
            return g
        if isinstance(g, And):
            return conj([minus_inf(a) for a in g.args])
        if isinstance(g, Or):
            return disj([minus_inf(a) for a in g.args])
        return g

    def plus_inf(g: Formula) -> Formula:
        if isinstance(g, Le):
            c = lin_coeff(g.t, v)
            if c == 1:
                return FALSE
            if c == -1:
                return TRUE
            return g
        if isinstance(g, And):
            return conj([plus_inf(a) for a in g.args])
        if isinstance(g, Or):
            return disj([plus_inf(a) for a in g.args])
        return g

    # bounds are non-strict, so windows above/below a bound are b+j / u-j
    # with j ranging over 0..D-1
    out: list[Formula] = []
    if len(lowers) <= len(uppers):
        base = minus_inf(f)
        for j in range(big_d):
            out.append(_subst(base, v, Lin(j, ())))
            for b in lowers:
                out.append(_subst(f, v, lin_add(b, Lin(j, ()))))
    else:
        base = plus_inf(f)
        for j in range(big_d):
            out.append(_subst(base, v, Lin(-j, ())))
            for u in uppers:
                out.append(_subst(f, v, lin_sub(u, Lin(j, ()))))
    return disj(out)


def _eliminate_exists(v: str, f: Formula) -> Formula:
    """Eliminate one integer existential from QF NNF f."""
    if v not in f.free_vars():
        return f
    if isinstance(f, Or):
        return disj([_eliminate_exists(v, a) for a in f.args])
    # equality substitution shortcut: exists v (c*v + r = 0 and rest)
    conjuncts = list(f.args) if isinstance(f, And) else [f]
    for i, c0 in enumerate(conjuncts):
        if isinstance(c0, Eq):
            c = lin_coeff(c0.t, v)
            if c:
                t = c0.t if c > 0 else lin_scale(c0.t, -1)
                c = abs(c)
                rest = lin_drop(t, v)  # c*v + rest = 0
                others = conjuncts[:i] + conjuncts[i + 1:]
                # scale each atom by c and substitute c*v := -rest
                def subst_scaled(g: Formula) -> Formula:
                    if isinstance(g, (Le, Eq)):
                        cc = lin_coeff(g.t, v)
                        if not cc:
                            return g
                        scaled = lin_scale(g.t, c)  # coefficient cc*c of v
                        repl = lin_add(lin_drop(scaled, v),
                                       lin_scale(rest, -cc))
                        return _simp_atom(type(g)(repl))
                    if isinstance(g, (Dvd, NDvd)):
                        cc = lin_coeff(g.t, v)
                        if not cc:
                            return g
                        repl = lin_add(lin_drop(lin_scale(g.t, c), v),
                                       lin_scale(rest, -cc))
                        return _simp_atom(type(g)(g.d * c, repl))
                    if isinstance(g, And):
                        return conj([subst_scaled(a) for a in g.args])
                    if isinstance(g, Or):
                        return disj([subst_scaled(a) for a in g.args])
                    return g

                guard = _simp_atom(Dvd(c, rest)) if c > 1 else TRUE
                return conj([guard] + [subst_scaled(g) for g in others])
    return _cooper(v, f)


@lru_cache(maxsize=4096)
def pres_qe(f: Formula) -> Formula:
    """Equivalent quantifier-free formula over N (may use divisibility)."""
    if isinstance(f, (TrueF, FalseF, Le, Eq, Dvd, NDvd)):
        return _simp_atom(f)
    if isinstance(f, And):
        return conj([pres_qe(a) for a in f.args])
    if isinstance(f, Or):
        return disj([pres_qe(a) for a in f.args])
    if isinstance(f, Not):
        return nnf(pres_qe(f.arg), negated=True)
    if isinstance(f, Exists):
        inner = pres_qe(f.arg)
        # relativize to N: v >= 0
        guarded = conj([Le(lin_var(f.var, -1)), nnf(inner)])
        return _eliminate_exists(f.var, guarded)
    if isinstance(f, Forall):
        return pres_qe(Not(Exists(f.var, Not(f.arg))))
    raise PresburgerError(f"unexpected node {type(f).__name__}")


# --- DNF and the Hilbert route -------------------------------------------------

_DNF_CAP = 200_000


def _dnf(f: Formula) -> list[list[Formula]]:
    """Disjunctive normal form of a QF NNF formula, as lists of atoms."""
    if isinstance(f, TrueF):
        return [[]]
    if isinstance(f, FalseF):
        return []
    if isinstance(f, (Le, Eq, Dvd)):
        return [[f]]
    if isinstance(f, NDvd):
        # d does not divide t  <=>  t = r (mod d) for some r in 1..d-1
        return [[Dvd(f.d, lin_add(f.t, Lin(-r, ())))] for r in range(1, f.d)]
    if isinstance(f, Or):
        out: list[list[Formula]] = []
        for a in f.args:
            out.extend(_dnf(a))
            if len(out) > _DNF_CAP:
                raise PresburgerError("DNF explosion")
        return out
    if isinstance(f, And):
        out = [[]]
        for a in f.args:
            branch = _dnf(a)
            out = [x + y for x in out for y in branch]
            if len(out) > _DNF_CAP:
                raise PresburgerError("DNF explosion")
        return out
    raise PresburgerError(f"formula not in QF NNF: {type(f).__name__}")


def _conjunct_to_parts(atoms: list[Formula], variables: tuple[str, ...]) -> list[LinearSet]:
    """Solve a conjunction of atoms over N and project onto `variables`."""
    aux: list[str] = []
    for a in atoms:
        for v in a.free_vars():
            if v not in variables and v not in aux:
                aux.append(v)
    cols = list(variables) + aux
    col_ix = {v: i for i, v in enumerate(cols)}
    rows: list[list[int]] = []
    rhs: list[int] = []
    nextra = 0
    extras: list[tuple[str, int]] = []  # (kind, data) bookkeeping for width

    # first pass to count extra columns: one slack per Le, quotient pair per Dvd
    n_slack = sum(1 for a in atoms if isinstance(a, Le))
    n_dvd = sum(1 for a in atoms if isinstance(a, Dvd))
    width = len(cols) + n_slack + 2 * n_dvd
    si = len(cols)
    di = len(cols) + n_slack
    for a in atoms:
        row = [0] * width
        if isinstance(a, (Le, Eq)):
            for v, c in a.t.coeffs:
                row[col_ix[v]] = c
            if isinstance(a, Le):
                row[si] = 1
                si += 1
            rows.append(row)
            rhs.append(-a.t.const)
        elif isinstance(a, Dvd):
            for v, c in a.t.coeffs:
                row[col_ix[v]] = c
            row[di] = -a.d
            row[di + 1] = a.d
            di += 2
            rows.append(row)
            rhs.append(-a.t.const)
        elif isinstance(a, TrueF):
            continue
        else:
            raise PresburgerError(f"unsolvable atom {a!r}")
    k = len(variables)
    if not rows:
        return [LinearSet(tuple([0] * k),
                          frozenset(tuple(1 if i == j else 0 for i in range(k))
                                    for j in range(k)))]
    bases, periods = solve_system(rows, rhs, width)
    proj_periods = frozenset(p[:k] for p in periods if any(p[:k]))
    out = []
    seen = set()
    for b in bases:
        pb = b[:k]
        if pb in seen:
            continue
        seen.add(pb)
        out.append(LinearSet(pb, proj_periods))
    return out


def _prenex_existential(f: Formula, counter: itertools.count) -> tuple[list[str], Formula]:
    """Pull existentials out of a Forall-free NNF formula, renaming apart."""
    if isinstance(f, Exists):
        fresh = f"_q{next(counter)}"
        body = _rename(f.arg, f.var, fresh)
        evs, matrix = _prenex_existential(body, counter)
        # relativize to N
        return [fresh] + evs, conj([Le(lin_var(fresh, -1)), matrix])
    if isinstance(f, And):
        evs: list[str] = []
        parts = []
        for a in f.args:
            e, m = _prenex_existential(a, counter)
            evs.extend(e)
            parts.append(m)
        return evs, conj(parts)
    if isinstance(f, Or):
        evs = []
        parts = []
        for a in f.args:
            e, m = _prenex_existential(a, counter)
            evs.extend(e)
            parts.append(m)
        return evs, disj(parts)
    return [], f


def _rename(f: Formula, old: str, new: str) -> Formula:
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, (Le, Eq)):
        c = lin_coeff(f.t, old)
        if not c:
            return f
        return type(f)(lin_add(lin_drop(f.t, old), lin_var(new, c)))
    if isinstance(f, (Dvd, NDvd)):
        c = lin_coeff(f.t, old)
        if not c:
            return f
        return type(f)(f.d, lin_add(lin_drop(f.t, old), lin_var(new, c)))
    if isinstance(f, And):
        return conj([_rename(a, old, new) for a in f.args])
    if isinstance(f, Or):
        return disj([_rename(a, old, new) for a in f.args])
    if isinstance(f, (Exists, Forall)):
        if f.var == old:
            return f
        return type(f)(f.var, _rename(f.arg, old, new))
    raise PresburgerError("rename")


def _has_forall(f: Formula) -> bool:
    if isinstance(f, Forall):
        return True
    if isinstance(f, (And, Or)):
        return any(_has_forall(a) for a in f.args)
    if isinstance(f, (Exists, Not)):
        return _has_forall(f.arg if not isinstance(f, Exists) else f.arg)
    return False


def formula_to_sl(f: Formula, variables: Sequence[str]) -> SemilinearSet:
    """Semilinear set of f over the ordered free-variable tuple.

    Purely existential formulas are solved directly (Hilbert basis per DNF
    conjunct, then projection); others are quantifier-eliminated first.
    """
    variables = tuple(variables)
    extra = f.free_vars() - set(variables)
    if extra:
        raise PresburgerError(f"free variables {sorted(extra)} not among {variables}")
    g = nnf(f)
    if _has_forall(g):
        g = nnf(pres_qe(g))
    evs, matrix = _prenex_existential(g, itertools.count())
    parts: list[LinearSet] = []
    for conjunct in _dnf(matrix):
        parts.extend(_conjunct_to_parts(conjunct, variables))
    from .semilinear import sl_simplify
    return sl_simplify(SemilinearSet(len(variables), tuple(parts)))


def sl_to_formula(s: SemilinearSet, variables: Sequence[str] | None = None) -> Formula:
    """Existential Presburger description of a semilinear set."""
    variables = tuple(variables) if variables is not None else tuple(
        f"x{i}" for i in range(s.dim))
    if len(variables) != s.dim:
        raise PresburgerError("variable tuple does not match dimension")
    disjuncts: list[Formula] = []
    fresh = itertools.count()
    for part in s.parts:
        periods = sorted(part.periods)
        lams = [f"_l{next(fresh)}" for _ in periods]
        eqs: list[Formula] = []
        for j, v in enumerate(variables):
            t = Lin(part.base[j], tuple((lams[i], periods[i][j])
                                        for i in range(len(periods))
                                        if periods[i][j]))
            eqs.append(eq(lin_var(v), t))
        body = conj(eqs)
        for lam in reversed(lams):
            body = Exists(lam, body)
        disjuncts.append(body)
    return disj(disjuncts)


@lru_cache(maxsize=4096)
def sl_to_qf(s: SemilinearSet) -> Formula:
    """Quantifier-free description over x0..x{k-1}; cached per set so boolean
    combinations pay for elimination once per operand, not per combination."""
    variables = tuple(f"x{i}" for i in range(s.dim))
    return nnf(pres_qe(sl_to_formula(s, variables)))


def combine_to_sl(sets: Sequence[SemilinearSet], combiner) -> SemilinearSet:
    """Apply a boolean combiner to same-dimension semilinear sets."""
    dim = sets[0].dim
    variables = tuple(f"x{i}" for i in range(dim))
    fs = [sl_to_qf(s) for s in sets]
    return formula_to_sl(combiner(fs), variables)


def quotient_to_sl(y: SemilinearSet, x: SemilinearSet) -> SemilinearSet:
    """{ z : exists v in x with z + v in y }, built as the displayed formula."""
    dim = y.dim
    zs = tuple(f"z{i}" for i in range(dim))
    xs = tuple(f"u{i}" for i in range(dim))
    ys = tuple(f"w{i}" for i in range(dim))
    fx = sl_to_formula(x, xs)
    fy = sl_to_formula(y, ys)
    links = [eq(lin_add(lin_var(zs[i]), lin_var(xs[i])), lin_var(ys[i]))
             for i in range(dim)]
    body = conj([fx, fy] + links)
    for v in reversed(xs + ys):
        body = Exists(v, body)
    return formula_to_sl(body, zs)


def pres_sat(f: Formula) -> tuple[bool, dict[str, int] | None]:
    """Satisfiability over N with a witness assignment when satisfiable."""
    fv = tuple(sorted(f.free_vars()))
    s = formula_to_sl(f, fv)
    if not s.parts:
        return False, None
    base = min(p.base for p in s.parts)
    return True, dict(zip(fv, base))


# --- parsing -------------------------------------------------------------------

_PTOKENS = re.compile(
    r"\s*(?:(\()|(\))|(&&)|(\|\|)|(!)|(\|)|(<=)|(<)|(=)|(\+)|(\*)|(\d+)|"
    r"(exists\b)|(forall\b)|(\.)|([A-Za-z_][A-Za-z0-9_]*))")


class _PParser:
    def __init__(self, text: str):
        self.text = text
        self.toks: list[str] = []
        pos = 0
        while pos < len(text):
            m = _PTOKENS.match(text, pos)
            if m is None or m.end() == pos:
                if not text[pos:].strip():
                    break
                raise PresburgerError(f"bad token at {pos}: {text[pos:pos+10]!r}")
            self.toks.append(next(g for g in m.groups() if g is not None))
            pos = m.end()
        self.i = 0

    def peek(self) -> str | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def eat(self, tok: str | None = None) -> str:
        if self.i >= len(self.toks):
            raise PresburgerError("unexpected end of formula")
        t = self.toks[self.i]
        if tok is not None and t != tok:
            raise PresburgerError(f"expected {tok!r}, got {t!r}")
        self.i += 1
        return t

    def formula(self) -> Formula:
        return self.f_or()

    def f_or(self) -> Formula:
        parts = [self.f_and()]
        while self.peek() == "||":
            self.eat()
            parts.append(self.f_and())
        return disj(parts)

    def f_and(self) -> Formula:
        parts = [self.f_unary()]
        while self.peek() == "&&":
            self.eat()
            parts.append(self.f_unary())
        return conj(parts)

    def f_unary(self) -> Formula:
        t = self.peek()
        if t == "!":
            self.eat()
            return neg(self.f_unary())
        if t in ("exists", "forall"):
            self.eat()
            var = self.eat()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", var):
                raise PresburgerError(f"bad variable {var!r}")
            self.eat(".")
            body = self.f_or()
            return Exists(var, body) if t == "exists" else Forall(var, body)
        if t == "(":
            save = self.i
            self.eat()
            try:
                inner = self.f_or()
                if self.peek() == ")":
                    self.eat()
                    nxt = self.peek()
                    if nxt in ("=", "<=", "<", "+", "*", "|"):
                        # it was a parenthesized term after all
                        raise PresburgerError("term context")
                    return inner
                raise PresburgerError("term context")
            except PresburgerError:
                self.i = save
        return self.atom()

    def atom(self) -> Formula:
        t1 = self.term()
        op = self.peek()
        if op == "=":
            self.eat()
            return eq(t1, self.term())
        if op == "<=":
            self.eat()
            return le(t1, self.term())
        if op == "<":
            self.eat()
            return lt(t1, self.term())
        if op == "|":
            self.eat()
            if t1.coeffs or t1.const < 2:
                raise PresburgerError("divisibility needs a constant divisor >= 2")
            return dvd(t1.const, self.term())
        raise PresburgerError(f"expected comparison, got {op!r}")

    def term(self) -> Lin:
        t = self.term_atom()
        while self.peek() == "+":
            self.eat()
            t = lin_add(t, self.term_atom())
        return t

    def term_atom(self) -> Lin:
        t = self.peek()
        if t == "(":
            self.eat()
            inner = self.term()
            self.eat(")")
            return inner
        if t is not None and t.isdigit():
            self.eat()
            if self.peek() == "*":
                self.eat()
                var = self.eat()
                return lin_var(var, int(t))
            return Lin(int(t), ())
        if t is not None and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", t):
            self.eat()
            return lin_var(t)
        raise PresburgerError(f"expected term, got {t!r}")


def parse_formula(text: str) -> Formula:
    p = _PParser(text)
    f = p.formula()
    if p.i != len(p.toks):
        raise PresburgerError(f"trailing input: {' '.join(p.toks[p.i:])!r}")
    return f
