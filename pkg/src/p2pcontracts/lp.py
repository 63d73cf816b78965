"""Dense tableau simplex with Bland's rule.

Sizes here are tiny, so a full tableau is simple and fast enough; Bland's
smallest-index rule guarantees termination on degenerate problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-10
MAX_ITER = 100_000


class Infeasible(ValueError):
    def __init__(self, message: str, certificate: np.ndarray | None = None):
        super().__init__(message)
        self.certificate = certificate


class Unbounded(ValueError):
    pass


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])


def _run(T: np.ndarray, basis: list[int], ncols: int, tol: float = TOL) -> int:
    """Minimize the last-row objective of tableau T in place. Returns iterations."""
    m = T.shape[0] - 1
    for it in range(MAX_ITER):
        cost = T[-1, :ncols]
        entering = np.flatnonzero(cost < -tol)
        if entering.size == 0:
            return it
        col = int(entering[0])
        column = T[:m, col]
        pos = column > tol
        if not np.any(pos):
            raise Unbounded(f"column {col} has no positive entry")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / column[pos]
        best = np.min(ratios)
        ties = np.flatnonzero(ratios <= best + tol * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise RuntimeError("simplex iteration limit reached")


def maximize_ub(c, A, b, tol: float = TOL) -> LPResult:
    """max c.y subject to A y <= b, y >= 0, with b >= 0.

    The slack basis is feasible, so no phase 1 is needed. ``duals`` solves
    min b.x subject to A^T x >= c, x >= 0.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise ValueError("maximize_ub needs a nonnegative right-hand side")
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -c
    basis = list(range(n, n + m))
    its = _run(T, basis, n + m, tol)
    y = np.zeros(n + m)
    y[basis] = T[:m, -1]
    return LPResult(y[:n], float(T[-1, -1]), T[-1, n : n + m].copy(), its)


def minimize_eq(c, A_eq, b_eq, tol: float = TOL) -> LPResult:
    """min c.x subject to A_eq x = b_eq, x >= 0, by the two-phase method."""
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    # phase 1: artificial identity, minimize their sum
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    its = _run(T, basis, n + m, tol)
    if -T[-1, -1] > tol * max(1.0, b.sum()):
        raise Infeasible(f"phase 1 ended with infeasibility {-T[-1, -1]:.3g}", T[-1, n : n + m].copy())
    # drive remaining artificials out of the basis
    keep = []
    for r in range(m):
        if basis[r] >= n:
            cols = np.flatnonzero(np.abs(T[r, :n]) > tol)
            if cols.size:
                _pivot(T, r, int(cols[0]))
                basis[r] = int(cols[0])
                keep.append(r)
        else:
            keep.append(r)
    rows = keep + [m]
    T2 = np.hstack([T[rows][:, :n], T[rows][:, -1:]])
    basis2 = [basis[r] for r in keep]
    T2[-1] = 0.0
    T2[-1, :n] = c
    for r, j in enumerate(basis2):
        T2[-1] -= c[j] * T2[r]
    its += _run(T2, basis2, n, tol)
    x = np.zeros(n)
    x[basis2] = T2[:-1, -1]
    return LPResult(x, float(c @ x), np.zeros(0), its)
