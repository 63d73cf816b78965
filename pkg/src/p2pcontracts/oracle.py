"""Brute-force checks that share no code path with the closed forms.

The risk-sharing problems are equality-constrained convex quadratics, so
their KKT conditions form one linear system that numpy solves directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .market import MarketParams

GRID_LIMIT = 3


class SingularKkt(np.linalg.LinAlgError):
    pass


class NonFiniteEvaluation(ValueError):
    pass


class GridTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class KktSystem:
    dim: int
    H: np.ndarray
    C: np.ndarray
    rhs: np.ndarray
    g: np.ndarray

    def matrix(self) -> np.ndarray:
        m = self.C.shape[0]
        return np.block([[self.H, self.C.T], [self.C, np.zeros((m, m))]])


def _constraints(mu: np.ndarray, with_p: bool) -> tuple[np.ndarray, np.ndarray]:
    """Fairness rows then zero-conserving rows over x = (vec_row(A), p).

    The fairness rows sum to the zero-conserving rows weighted by mu, so the
    last fairness row is redundant and dropped to keep the system nonsingular.
    """
    n = mu.shape[0]
    dim = n * n + (n if with_p else 0)
    fair = np.zeros((n, dim))
    zc = np.zeros((n, dim))
    for i in range(n):
        fair[i, i * n : (i + 1) * n] = mu
        for r in range(n):
            zc[i, r * n + i] = 1.0
        if with_p:
            fair[i, n * n + i] = mu[i]
            zc[i, n * n + i] = 1.0
    C = np.vstack([fair[:-1], zc])
    b = np.concatenate([mu[:-1], np.ones(n)])
    return C, b


def _member_blocks(mu, Sigma, gamma) -> tuple[np.ndarray, np.ndarray]:
    n = mu.shape[0]
    H = np.zeros((n * n, n * n))
    for i in range(n):
        H[i * n : (i + 1) * n, i * n : (i + 1) * n] = gamma[i] * Sigma
    return H, np.tile(mu, n)


def build_rs_system(params: MarketParams, include_reinsurer_term: bool = True, eta=None) -> KktSystem:
    mu, S, g = params.mu, params.Sigma, params.gamma
    n = params.n
    HA, gA = _member_blocks(mu, S, g)
    H = np.zeros((n * n + n, n * n + n))
    H[: n * n, : n * n] = HA
    lin = np.zeros(n * n + n)
    lin[: n * n] = gA
    if include_reinsurer_term:
        H[n * n :, n * n :] = params.gamma_R * S
        lin[n * n :] = mu
    else:
        if eta is None:
            raise ValueError("the follower problem needs loadings")
        lin[n * n :] = (1.0 + np.asarray(eta, dtype=float)) * mu
    C, b = _constraints(mu, with_p=True)
    return KktSystem(n * n + n, H, C, b, lin)


def _solve(system: KktSystem) -> np.ndarray:
    K = system.matrix()
    rhs = np.concatenate([-system.g, system.rhs])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularKkt(str(exc)) from exc
    if not np.all(np.isfinite(sol)) or np.linalg.cond(K) > 1e14:
        raise SingularKkt("KKT matrix is numerically singular")
    return sol[: system.dim]


def kkt_solve_rs(
    params: MarketParams, include_reinsurer_term: bool = True, eta=None
) -> tuple[np.ndarray, np.ndarray]:
    """Optimal (A, p) of the pool-wide problem, or the plan manager's reply to ``eta``."""
    n = params.n
    x = _solve(build_rs_system(params, include_reinsurer_term, eta))
    return x[: n * n].reshape(n, n), x[n * n :]


def kkt_solve_rs_raw(mu, Sigma, gamma, gamma_R) -> tuple[np.ndarray, np.ndarray]:
    """Same as :func:`kkt_solve_rs` on bare arrays, allowing one-member sub-markets."""
    mu, Sigma, gamma = (np.asarray(a, dtype=float) for a in (mu, Sigma, gamma))
    n = mu.shape[0]
    HA, gA = _member_blocks(mu, Sigma, gamma)
    H = np.zeros((n * n + n, n * n + n))
    H[: n * n, : n * n] = HA
    H[n * n :, n * n :] = gamma_R * Sigma
    lin = np.concatenate([gA, mu])
    C, b = _constraints(mu, with_p=True)
    x = _solve(KktSystem(n * n + n, H, C, b, lin))
    return x[: n * n].reshape(n, n), x[n * n :]


def kkt_solve_rs2(mu, Sigma, gamma) -> np.ndarray:
    """Optimal mutualization when no reinsurance is available."""
    mu, Sigma, gamma = (np.asarray(a, dtype=float) for a in (mu, Sigma, gamma))
    n = mu.shape[0]
    if n == 1:
        return np.ones((1, 1))
    H, lin = _member_blocks(mu, Sigma, gamma)
    C, b = _constraints(mu, with_p=False)
    return _solve(KktSystem(n * n, H, C, b, lin)).reshape(n, n)


def recovered_multipliers(params: MarketParams, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Multipliers (psi, phi) of the fairness and zero-conserving constraints."""
    mu, S, g = params.mu, params.Sigma, params.gamma
    k = 1.0 / float(mu @ np.linalg.solve(S, mu))
    sg = float(np.sum(1.0 / g))
    r = 1.0 - p
    psi = k * g * r * mu
    phi = ((r @ S) - k * (r * mu).sum() * mu) / sg
    return psi, phi


def stationarity_residual(params: MarketParams, A, p, eta=None) -> float:
    """Largest gradient entry of the reduced Lagrangian at (A, p).

    Without ``eta`` the reinsurer's variance term is used (pool-wide problem);
    with ``eta`` the plan manager's premium term replaces it.
    """
    A = np.asarray(A, dtype=float)
    p = np.asarray(p, dtype=float)
    mu, S, g = params.mu, params.Sigma, params.gamma
    psi, phi = recovered_multipliers(params, p)
    dA = g[:, None] * (A @ S) - np.outer(np.ones(params.n), phi) - np.outer(psi, mu)
    if eta is None:
        dp = params.gamma_R * S @ p - mu * psi - phi
    else:
        dp = mu * np.asarray(eta, dtype=float) - mu * psi - phi
    return float(max(np.max(np.abs(dA)), np.max(np.abs(dp))))


def fd_gradient(f: Callable[[np.ndarray], float], x, rel_step: float = 1e-5) -> np.ndarray:
    """Central differences with step rel_step * (1 + |x_i|)."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        h = rel_step * (1.0 + abs(x[i]))
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        fu, fd = f(up), f(dn)
        if not (np.isfinite(fu) and np.isfinite(fd)):
            raise NonFiniteEvaluation(f"f is not finite near x[{i}] = {x[i]}")
        grad[i] = (fu - fd) / (2.0 * h)
    return grad


class FollowerMap:
    """p(eta) from the follower KKT system; affine in eta, so n + 1 solves fix it."""

    def __init__(self, params: MarketParams):
        n = params.n
        self.params = params
        _, self.p0 = kkt_solve_rs(params, False, np.zeros(n))
        cols = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            cols.append(kkt_solve_rs(params, False, e)[1] - self.p0)
        self.J = np.column_stack(cols)

    def p(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return self.p0 + eta @ self.J.T

    def leader_objective(self, eta) -> np.ndarray:
        """v(eta, p(eta)) = (gamma_R/2) p'Sigma p - (D(mu) eta)'p; the leader minimizes it."""
        eta = np.asarray(eta, dtype=float)
        p = self.p(eta)
        S, mu = self.params.Sigma, self.params.mu
        quad = 0.5 * self.params.gamma_R * np.einsum("...i,ij,...j->...", p, S, p)
        return quad - np.einsum("...i,...i->...", mu * eta, p)


@dataclass(frozen=True)
class GridResult:
    best_eta: np.ndarray
    best_value: float
    step: np.ndarray


def grid_leader(params: MarketParams, lo, hi, steps_per_dim: int) -> GridResult:
    n = params.n
    if n > GRID_LIMIT:
        raise GridTooLarge(f"grid search is limited to n <= {GRID_LIMIT}, got {n}")
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
    if np.any(lo >= hi):
        raise ValueError("need lo < hi in every coordinate")
    axes = [np.linspace(lo[i], hi[i], steps_per_dim) for i in range(n)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    vals = FollowerMap(params).leader_objective(pts)
    j = int(np.argmin(vals))
    return GridResult(pts[j], float(vals[j]), (hi - lo) / (steps_per_dim - 1))


def grid_single_loading(params: MarketParams, lo: float = 0.0, hi: float = 1.0, points: int = 10001):
    """Best common loading on a uniform 1-D grid."""
    ts = np.linspace(lo, hi, points)
    etas = np.outer(ts, np.ones(params.n))
    vals = FollowerMap(params).leader_objective(etas)
    j = int(np.argmin(vals))
    return float(ts[j]), float(vals[j])
