"""Shared automata fixtures used across the test suite.

fig1: accepts exactly the {a,b}-posets containing at least one a.
fig2: accepts (a||b) parallel-iterated at least once.
fig3: accepts the substitution language c o_xi (a||(b.xi))*xi.
ex_complement: accepts ((a.a)||a) parallel-iterated, then a.
"""

from spb.automata import make_automaton
from spb.terms import par_components, parse_term, seq_factors, Letter, Par, Seq


def fig1():
    return make_automaton(
        states=["1", "2"],
        alphabet=["a", "b"],
        seq=[("1", "a", "2"), ("2", "a", "2"), ("1", "b", "1"), ("2", "b", "2")],
        forks=[("1", ["1", "1"]), ("2", ["2", "2"])],
        joins=[(["1", "1"], "1"), (["2", "2"], "2"), (["1", "2"], "2")],
        initial=["1"], final=["2"])


def fig1_semantics(t):
    return "a" in t.pretty()


def fig2():
    return make_automaton(
        states=["1", "2", "3", "4", "5", "6"],
        alphabet=["a", "b"],
        seq=[("2", "a", "4"), ("3", "b", "5")],
        forks=[("1", ["1", "1"]), ("1", ["2", "3"])],
        joins=[(["6", "6"], "6"), (["4", "5"], "6")],
        initial=["1"], final=["6"])


def fig2_semantics(t):
    # parallel multiset of n >= 1 copies of a and n copies of b
    comps = par_components(t)
    names = sorted(c.pretty() for c in comps)
    n = len(comps) // 2
    return len(comps) >= 2 and names == ["a"] * n + ["b"] * n


def fig3():
    return make_automaton(
        states=["1", "2", "3", "4", "5"],
        alphabet=["a", "b", "c"],
        seq=[("1", "b", "3"), ("3", "c", "4"), ("2", "a", "5")],
        forks=[("3", ["1", "2"])],
        joins=[(["4", "5"], "4")],
        initial=["3"], final=["4"])


def fig3_semantics(t):
    # smallest language with c in L and x in L => a||(b.x) in L
    if t == Letter("c"):
        return True
    if isinstance(t, Par) and len(t.children) == 2:
        first, second = t.children
        if first == Letter("a") and isinstance(second, Seq):
            fs = seq_factors(second)
            if fs[0] == Letter("b"):
                rest = fs[1] if len(fs) == 2 else Seq(fs[1:])
                return fig3_semantics(rest)
    return False


def ex_complement():
    return make_automaton(
        states=["1", "2", "3", "4", "5", "6", "7", "8"],
        alphabet=["a"],
        seq=[("2", "a", "4"), ("4", "a", "5"), ("3", "a", "6"), ("7", "a", "8")],
        forks=[("1", ["1", "1"]), ("1", ["2", "3"])],
        joins=[(["7", "7"], "7"), (["5", "6"], "7")],
        initial=["1"], final=["8"])


def ex_complement_semantics(t):
    # ((a.a)||a)^(parallel, >=1) followed by a single a
    fs = seq_factors(t)
    if len(fs) != 2 or fs[1] != Letter("a"):
        return False
    comps = par_components(fs[0])
    if len(comps) < 2:
        return False
    names = sorted(c.pretty() for c in comps)
    n = len(comps) // 2
    return names == ["a"] * n + ["a.a"] * n


def figure4_poset_term():
    return parse_term("(((a||b).(c||d).e.(f||g).h)||i).j")
