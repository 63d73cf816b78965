"""Dense linear algebra for the small symmetric systems used by the closed forms.

Matrices here are at most a dozen rows, so the routines favour plain,
verifiable algorithms (Cholesky, LU with partial pivoting, cyclic Jacobi)
over speed. Inputs are numpy arrays; nothing is mutated in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-12
SYMMETRY_RTOL = 1e-10
JACOBI_MAX_SWEEPS = 100
JACOBI_RTOL = 1e-10


class LinAlgError(ValueError):
    pass


class NotSymmetric(LinAlgError):
    pass


class NotPositiveDefinite(LinAlgError):
    def __init__(self, pivot_index: int, pivot_value: float):
        super().__init__(
            f"matrix is not positive definite: pivot {pivot_index} = {pivot_value:.6g}"
        )
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value


class Singular(LinAlgError):
    def __init__(self, pivot_index: int, pivot_value: float):
        super().__init__(f"matrix is singular: pivot {pivot_index} = {pivot_value:.6g}")
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value


class NoConvergence(LinAlgError):
    pass


def _as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinAlgError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinAlgError("matrix has non-finite entries")
    return a


def is_symmetric(m, rtol: float = SYMMETRY_RTOL) -> bool:
    a = np.asarray(m, dtype=float)
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    return bool(np.max(np.abs(a - a.T), initial=0.0) <= rtol * scale)


def _require_symmetric(a: np.ndarray) -> None:
    if not is_symmetric(a):
        raise NotSymmetric("matrix is not symmetric within tolerance")


def cholesky(m) -> np.ndarray:
    """Lower-triangular L with L @ L.T == m.

    Raises NotPositiveDefinite carrying the index of the first pivot that
    falls below PIVOT_TOL.
    """
    a = _as_square(m)
    _require_symmetric(a)
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if d <= PIVOT_TOL:
            raise NotPositiveDefinite(j, float(d))
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def is_positive_definite(m) -> bool:
    try:
        cholesky(m)
    except NotPositiveDefinite:
        return False
    return True


def forward_substitution(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = L.shape[0]
    x = np.array(b, dtype=float, copy=True)
    for i in range(n):
        x[i] = (x[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def back_substitution(U: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = U.shape[0]
    x = np.array(b, dtype=float, copy=True)
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - U[i, i + 1 :] @ x[i + 1 :]) / U[i, i]
    return x


def cholesky_solve(m, b) -> np.ndarray:
    L = cholesky(m)
    y = forward_substitution(L, np.asarray(b, dtype=float))
    return back_substitution(L.T, y)


@dataclass(frozen=True)
class LU:
    lu: np.ndarray  # unit-lower L below the diagonal, U on and above
    perm: np.ndarray
    sign: int

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        n = self.lu.shape[0]
        if b.shape[0] != n:
            raise LinAlgError(f"right-hand side has {b.shape[0]} rows, expected {n}")
        x = b[self.perm].copy()
        for i in range(n):
            x[i] = x[i] - self.lu[i, :i] @ x[:i]
        for i in range(n - 1, -1, -1):
            x[i] = (x[i] - self.lu[i, i + 1 :] @ x[i + 1 :]) / self.lu[i, i]
        return x

    def det(self) -> float:
        return float(self.sign * np.prod(np.diag(self.lu)))


def lu_factor(m) -> LU:
    a = _as_square(m).copy()
    n = a.shape[0]
    perm = np.arange(n)
    sign = 1
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) <= PIVOT_TOL:
            raise Singular(k, float(a[p, k]))
        if p != k:
            a[[k, p]] = a[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        a[k + 1 :, k] /= a[k, k]
        a[k + 1 :, k + 1 :] -= np.outer(a[k + 1 :, k], a[k, k + 1 :])
    return LU(a, perm, sign)


def solve(m, b) -> np.ndarray:
    """Solve m @ x = b for a vector or a matrix of right-hand sides."""
    return lu_factor(m).solve(b)


def invert(m) -> np.ndarray:
    a = _as_square(m)
    return lu_factor(a).solve(np.eye(a.shape[0]))


def det(m) -> float:
    try:
        return lu_factor(m).det()
    except Singular:
        return 0.0


def eigh_jacobi(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and column eigenvectors by cyclic Jacobi rotations."""
    a = _as_square(m)
    _require_symmetric(a)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    target = JACOBI_RTOL * max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(a**2) - np.sum(np.diag(a) ** 2))
        if off <= target:
            order = np.argsort(np.diag(a))
            return np.diag(a)[order].copy(), v[:, order]
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    raise NoConvergence(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")


def eigen_sym(m) -> np.ndarray:
    return eigh_jacobi(m)[0]


def inf_norm(m) -> float:
    return float(np.max(np.sum(np.abs(np.asarray(m, dtype=float)), axis=1)))


def diag_dominance_margins(m) -> np.ndarray:
    """Per-row m_ii - sum_{j != i} |m_ij|."""
    a = np.asarray(m, dtype=float)
    absrow = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
    return np.diag(a) - absrow


def norms(m) -> dict[str, float]:
    a = _as_square(m)
    return {
        "inf_norm": inf_norm(a),
        "diag_dominance_margin": float(np.min(diag_dominance_margins(a))),
    }
