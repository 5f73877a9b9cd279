"""Canonical tree form of nonempty N-free labeled posets.

A term is a letter, a sequential product of at least two factors, or a
parallel product of at least two components.  Canonical form flattens
nested products of the same kind and stores parallel components in a fixed
total order, so structural equality coincides with isomorphism of the
denoted posets.  The canonical printing is injective on canonical terms and
is precomputed, together with size and hash, because enumeration-based
oracles handle hundreds of thousands of terms.
"""

from __future__ import annotations

import re
from functools import lru_cache
from typing import Iterable, Iterator


class TermError(ValueError):
    """Raised on malformed term text or invalid construction."""


class SpTerm:
    __slots__ = ("size", "_str", "_hash")

    size: int
    _str: str
    _hash: int

    def pretty(self) -> str:
        return self._str

    def __str__(self) -> str:
        return self._str

    def __repr__(self) -> str:
        return f"<{self._str}>"

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        # canonical printing is injective on canonical terms
        return isinstance(other, SpTerm) and self._str == other._str

    def __lt__(self, other: "SpTerm") -> bool:
        return (self.size, self._str) < (other.size, other._str)


class Letter(SpTerm):
    __slots__ = ("symbol",)

    def __init__(self, symbol: str):
        self.symbol = symbol
        self.size = 1
        self._str = symbol
        self._hash = hash(symbol)


class Seq(SpTerm):
    """Sequential product; children are non-Seq and there are >= 2 of them."""

    __slots__ = ("children",)

    def __init__(self, children: tuple[SpTerm, ...]):
        self.children = children
        self.size = sum(c.size for c in children)
        # '.' binds tighter than '||': parallel children need parentheses
        self._str = ".".join(f"({c._str})" if isinstance(c, Par) else c._str
                             for c in children)
        self._hash = hash(self._str)


class Par(SpTerm):
    """Parallel product; children are non-Par, sorted, and >= 2 of them."""

    __slots__ = ("children",)

    def __init__(self, children: tuple[SpTerm, ...]):
        self.children = children
        self.size = sum(c.size for c in children)
        self._str = "||".join(c._str for c in children)
        self._hash = hash(self._str)


def term_key(t: SpTerm) -> tuple[int, str]:
    """Total order used everywhere a deterministic choice is needed."""
    return (t.size, t._str)


def seq(*factors: SpTerm) -> SpTerm:
    """Sequential product with canonical flattening."""
    flat: list[SpTerm] = []
    for f in factors:
        if isinstance(f, Seq):
            flat.extend(f.children)
        else:
            flat.append(f)
    if not flat:
        raise TermError("empty sequential product (SP+ has no empty poset)")
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def par(*components: SpTerm) -> SpTerm:
    """Parallel product with canonical flattening and child ordering."""
    flat: list[SpTerm] = []
    for c in components:
        if isinstance(c, Par):
            flat.extend(c.children)
        else:
            flat.append(c)
    if not flat:
        raise TermError("empty parallel product (SP+ has no empty poset)")
    if len(flat) == 1:
        return flat[0]
    return Par(tuple(sorted(flat, key=term_key)))


def letters_of(t: SpTerm) -> set[str]:
    if isinstance(t, Letter):
        return {t.symbol}
    out: set[str] = set()
    for c in t.children:  # type: ignore[union-attr]
        out |= letters_of(c)
    return out


def seq_factors(t: SpTerm) -> tuple[SpTerm, ...]:
    """The unique maximal sequential factorization (see max_factorizations)."""
    return t.children if isinstance(t, Seq) else (t,)


def par_components(t: SpTerm) -> tuple[SpTerm, ...]:
    """The unique maximal parallel factorization, as a sorted tuple."""
    return t.children if isinstance(t, Par) else (t,)


def max_factorizations(t: SpTerm) -> tuple[tuple[SpTerm, ...], tuple[SpTerm, ...]]:
    """Return (maximal sequential factors, maximal parallel components)."""
    return seq_factors(t), par_components(t)


def substitute_letter(t: SpTerm, xi: str, repl: SpTerm | None) -> SpTerm | None:
    """Replace every xi-labeled leaf by repl (uniformly).

    repl=None deletes the leaves; returns None if nothing survives.
    """
    if isinstance(t, Letter):
        return repl if t.symbol == xi else t
    kids = []
    for c in t.children:  # type: ignore[union-attr]
        r = substitute_letter(c, xi, repl)
        if r is not None:
            kids.append(r)
    if not kids:
        return None
    return seq(*kids) if isinstance(t, Seq) else par(*kids)


# --- parsing ----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\|\|)|(\.)|(\()|(\))|([a-z][a-zA-Z0-9_]*))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise TermError(f"syntax error at position {pos}: unexpected {stripped[0]!r}")
        tok = next(g for g in m.groups() if g is not None)
        tokens.append((tok, m.start()))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def next(self) -> str:
        if self.i >= len(self.tokens):
            raise TermError(f"syntax error: unexpected end of input in {self.text!r}")
        tok = self.tokens[self.i][0]
        self.i += 1
        return tok

    def parse(self) -> SpTerm:
        t = self.parse_par()
        if self.i != len(self.tokens):
            pos = self.tokens[self.i][1]
            raise TermError(f"syntax error at position {pos}: trailing input")
        return t

    def parse_par(self) -> SpTerm:
        parts = [self.parse_seq()]
        while self.peek() == "||":
            self.next()
            parts.append(self.parse_seq())
        return par(*parts)

    def parse_seq(self) -> SpTerm:
        parts = [self.parse_atom()]
        while self.peek() == ".":
            self.next()
            parts.append(self.parse_atom())
        return seq(*parts)

    def parse_atom(self) -> SpTerm:
        tok = self.next()
        if tok == "(":
            t = self.parse_par()
            if self.next() != ")":
                raise TermError(f"syntax error: missing ')' in {self.text!r}")
            return t
        if tok in (".", "||", ")"):
            raise TermError(f"syntax error: unexpected {tok!r} in {self.text!r}")
        return Letter(tok)


def parse_term(text: str) -> SpTerm:
    """Parse the sp-term grammar; '.' binds tighter than '||'."""
    if not text.strip():
        raise TermError("empty term (SP+ has no empty poset)")
    return _Parser(text).parse()


# --- enumeration ------------------------------------------------------------


@lru_cache(maxsize=None)
def _terms_exact(alphabet: tuple[str, ...], n: int, kind: str) -> tuple[SpTerm, ...]:
    """All canonical terms of size exactly n; kind restricts the root node.

    kind is one of 'any', 'noseq' (letters and Par roots), 'nopar'.
    Canonical forms are generated directly, never by deduplication.
    """
    out: list[SpTerm] = []
    if n == 1:
        out = [Letter(a) for a in alphabet]
    else:
        if kind in ("any", "nopar"):
            # sequential roots: ordered compositions into >= 2 non-Seq factors
            factors_by_size = [_terms_exact(alphabet, sz, "noseq") for sz in range(n)]

            def build_seq(remaining: int, acc: list[SpTerm]) -> None:
                if remaining == 0:
                    if len(acc) >= 2:
                        out.append(Seq(tuple(acc)))
                    return
                hi = remaining if acc else remaining - 1
                for part in range(1, hi + 1):
                    for t in factors_by_size[part]:
                        acc.append(t)
                        build_seq(remaining - part, acc)
                        acc.pop()

            build_seq(n, [])
        if kind in ("any", "noseq"):
            # parallel roots: non-decreasing multisets of >= 2 non-Par parts
            pool: list[SpTerm] = []
            for sz in range(1, n):
                pool.extend(_terms_exact(alphabet, sz, "nopar"))
            # pool is sorted: sizes ascend and each _terms_exact tuple is sorted

            def build_par(remaining: int, start: int, acc: list[SpTerm]) -> None:
                if remaining == 0:
                    if len(acc) >= 2:
                        out.append(Par(tuple(acc)))
                    return
                for i in range(start, len(pool)):
                    t = pool[i]
                    if t.size > remaining:
                        break
                    acc.append(t)
                    build_par(remaining - t.size, i, acc)
                    acc.pop()

            build_par(n, 0, [])
    out.sort(key=term_key)
    return tuple(out)


def enumerate_terms(alphabet: Iterable[str], max_size: int) -> Iterator[SpTerm]:
    """Yield every canonical term of size <= max_size exactly once.

    Deterministic order: by size, then by the canonical printing.
    """
    if max_size < 1:
        raise TermError("max_size must be >= 1")
    ab = tuple(sorted(set(alphabet)))
    if not ab:
        raise TermError("alphabet must be nonempty")
    for n in range(1, max_size + 1):
        yield from _terms_exact(ab, n, "any")
