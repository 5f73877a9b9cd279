"""Minimal nonnegative integer solutions of linear Diophantine systems.

Contejean-Devie search, vectorized with numpy: complete for A*x = b over
the naturals and adequate at desk scale.  Systems come from Presburger
conjuncts and commutative grammar flows, so they are sparse and have small
minimal solutions.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

Vec = tuple[int, ...]


class HilbertOverflow(RuntimeError):
    """Search frontier exceeded the safety cap."""


def solve_homogeneous(rows: Sequence[Sequence[int]], nvars: int,
                      cap: int = 400_000) -> list[Vec]:
    """Minimal nonzero solutions of A*x = 0, x in N^nvars.

    Contejean-Devie: grow candidates from the unit vectors, stepping only in
    directions that decrease the residual norm, pruning anything dominated
    by an already-found minimal solution.
    """
    if not rows:
        return [tuple(1 if i == j else 0 for i in range(nvars))
                for j in range(nvars)]
    a = np.array(rows, dtype=np.int64)  # (m, n)
    frontier = np.eye(nvars, dtype=np.int64)
    residual = frontier @ a.T  # (k, m)
    minimal: list[np.ndarray] = []

    solved = ~residual.any(axis=1)
    for x in frontier[solved]:
        minimal.append(x)
    frontier = frontier[~solved]
    residual = residual[~solved]

    total = 0
    while len(frontier):
        # CD criterion: extend x by e_j only when <A x, A e_j> < 0
        scores = residual @ a  # (k, n)
        cand_x, cand_j = np.nonzero(scores < 0)
        if not len(cand_x):
            break
        nxt = frontier[cand_x]
        nxt[np.arange(len(cand_x)), cand_j] += 1
        nxt = np.unique(nxt, axis=0)
        total += len(nxt)
        if total > cap:
            raise HilbertOverflow(f"Contejean-Devie frontier exceeded {cap}")
        if minimal:
            m = np.array(minimal, dtype=np.int64)
            dominated = (nxt[:, None, :] >= m[None, :, :]).all(axis=2).any(axis=1)
            nxt = nxt[~dominated]
        res = nxt @ a.T
        solved = ~res.any(axis=1)
        for x in nxt[solved]:
            md = np.array(minimal, dtype=np.int64) if minimal else None
            if md is None or not (x[None, :] >= md).all(axis=1).any():
                minimal.append(x)
        frontier = nxt[~solved]
        residual = res[~solved]
    # final minimality sweep (finds can arrive out of order within a level)
    out: list[Vec] = []
    for x in sorted((tuple(int(c) for c in m) for m in minimal), key=sum):
        if not any(all(o[i] <= x[i] for i in range(nvars)) for o in out):
            out.append(x)
    return out


def solve_system(rows: Sequence[Sequence[int]], rhs: Sequence[int],
                 nvars: int, cap: int = 400_000) -> tuple[list[Vec], list[Vec]]:
    """Solutions of A*x = rhs over N^nvars as (bases, periods).

    The solution set is exactly the union over bases b of b + periods*, via
    the standard homogenization: bases are the minimal solutions whose fresh
    coordinate equals 1, periods the minimal homogeneous solutions.
    """
    hom_rows = [tuple(r) + (-c,) for r, c in zip(rows, rhs)]
    minimal = solve_homogeneous(hom_rows, nvars + 1, cap=cap)
    bases = [m[:-1] for m in minimal if m[-1] == 1]
    periods = [m[:-1] for m in minimal if m[-1] == 0]
    return bases, periods
