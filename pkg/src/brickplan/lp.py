"""Dense two-phase tableau simplex for small standard-form LPs.

    minimize c @ x  subject to  A @ x = b,  x >= 0

Pivoting uses Bland's rule (smallest entering index, ties in the ratio test
broken by smallest basic-variable index), so the solver cannot cycle and
its result is a deterministic function of the input arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = 1e-10


class LPError(ArithmeticError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    pivots: int


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T: np.ndarray, basis: list[int], ncols: int, max_pivots: int) -> int:
    """Iterate until optimal over the first ``ncols`` columns. Objective row is T[-1]."""
    m = len(basis)
    pivots = 0
    while True:
        reduced = T[-1, :ncols]
        entering = np.flatnonzero(reduced < -EPS)
        if entering.size == 0:
            return pivots
        c = int(entering[0])
        col = T[:m, c]
        rows = np.flatnonzero(col > EPS)
        if rows.size == 0:
            raise Unbounded("objective unbounded below")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + EPS * max(1.0, abs(best))]
        r = int(min(tied, key=lambda i: basis[i]))
        _pivot(T, r, c)
        basis[r] = c
        pivots += 1
        if pivots > max_pivots:
            raise LPError("pivot limit exceeded")


def simplex(c, A, b, tol: float = 1e-9) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    n = c.size
    m = b.size
    if m == 0:
        if np.any(c < -EPS):
            raise Unbounded("no constraints and a negative cost")
        return LPResult(np.zeros(n), 0.0, 0)
    if A.shape != (m, n):
        A = A.reshape(m, n)
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    scale = max(1.0, float(np.abs(b).max()))

    # phase 1 on [A | I | b] with artificial basis
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    limit = 50 * (n + m) + 1000
    pivots = _run(T, basis, n + m, limit)
    if -T[-1, -1] > tol * scale:
        raise Infeasible(f"phase 1 residual {-T[-1, -1]:.3e}")

    # drive artificials out of the basis; rows that cannot be pivoted are redundant
    keep = []
    for r in range(m):
        if basis[r] >= n:
            cand = np.flatnonzero(np.abs(T[r, :n]) > 1e-9)
            if cand.size == 0:
                continue
            _pivot(T, r, int(cand[0]))
            basis[r] = int(cand[0])
            pivots += 1
        keep.append(r)
    T = np.vstack([T[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[r] for r in keep]

    # phase 2
    cb = c[basis]
    T[-1, :n] = c - cb @ T[:-1, :n]
    T[-1, -1] = -cb @ T[:-1, -1]
    pivots += _run(T, basis, n, limit)
    x = np.zeros(n)
    x[basis] = T[:-1, -1]
    x[np.abs(x) < EPS] = 0.0
    return LPResult(x, float(c @ x), pivots)
