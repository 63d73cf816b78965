"""Closed-form socially optimal risk sharing and the loadings that split its surplus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .conditions import PASS, FAIL, ConditionEntry
from .market import (
    Contract,
    MarketParams,
    WelfareReport,
    row_variances,
    total_welfare,
    welfare,
)

SCAN_STEP = 1e-4
REFINE_TOL = 1e-6


class SingularMbar(linalg.LinAlgError):
    pass


class NegativeP(ValueError):
    pass


class ZeroCession(ValueError):
    pass


@dataclass(frozen=True)
class RawSolution:
    """Closed form on bare arrays; works for single-member sub-markets too."""

    A: np.ndarray
    p: np.ndarray
    k: float
    Mbar: np.ndarray


def harmonic_weight(gamma: np.ndarray) -> float:
    """Sum of risk tolerances, sum_j 1/gamma_j."""
    return float(np.sum(1.0 / gamma))


def mutualization_raw(mu, Sigma, gamma, p) -> np.ndarray:
    """Optimal sharing of the retained losses D(1-p) X among members."""
    n = mu.shape[0]
    sg = harmonic_weight(gamma)
    Sinv_mu = linalg.cholesky_solve(Sigma, mu)
    k = 1.0 / float(mu @ Sinv_mu)
    P = np.outer(1.0 / gamma, np.ones(n)) / sg
    retained = np.diag(1.0 - p)
    return P @ retained + k * (np.eye(n) - P) @ retained @ np.outer(mu, Sinv_mu)


def mbar_raw(mu, Sigma, gamma, gamma_R) -> tuple[np.ndarray, float]:
    sg = harmonic_weight(gamma)
    k = 1.0 / float(mu @ linalg.cholesky_solve(Sigma, mu))
    Mbar = (gamma_R + 1.0 / sg) * Sigma + k * np.diag(mu**2 * gamma) - k * np.outer(mu, mu) / sg
    return 0.5 * (Mbar + Mbar.T), k


def solve_raw(mu, Sigma, gamma, gamma_R) -> RawSolution:
    mu = np.asarray(mu, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    Mbar, k = mbar_raw(mu, Sigma, gamma, gamma_R)
    try:
        p = 1.0 - gamma_R * linalg.solve(Mbar, Sigma @ np.ones(mu.shape[0]))
    except linalg.Singular as exc:
        raise SingularMbar(str(exc)) from exc
    return RawSolution(mutualization_raw(mu, Sigma, gamma, p), p, k, Mbar)


@dataclass(frozen=True)
class ParetoSolution:
    A_star: np.ndarray
    p_star: np.ndarray
    k: float
    Mbar: np.ndarray
    interior: bool

    def contract(self, eta) -> Contract:
        eta = np.broadcast_to(np.asarray(eta, dtype=float), self.p_star.shape).copy()
        return Contract(self.A_star, self.p_star, eta)


def solve_rs(params: MarketParams) -> ParetoSolution:
    raw = solve_raw(params.mu, params.Sigma, params.gamma, params.gamma_R)
    return ParetoSolution(raw.A, raw.p, raw.k, raw.Mbar, check_unicond2(params).passed)


def mutualization(params: MarketParams, p) -> np.ndarray:
    return mutualization_raw(params.mu, params.Sigma, params.gamma, np.asarray(p, dtype=float))


def no_reinsurer_allocation(params: MarketParams) -> np.ndarray:
    return mutualization(params, np.zeros(params.n))


def kappa_terms(params: MarketParams) -> dict[str, np.ndarray]:
    """Per-member building blocks shared by the interiority conditions."""
    mu, S, g = params.mu, params.Sigma, params.gamma
    sg = harmonic_weight(g)
    k = 1.0 / float(mu @ linalg.cholesky_solve(S, mu))
    var = np.diag(S)
    # d_ij = sigma_ij - k mu_i mu_j, the covariance left after removing the mean direction
    d = S - k * np.outer(mu, mu)
    own = k * mu**2 * g + (var - k * mu**2) / sg
    return {"k": np.array(k), "sg": np.array(sg), "d": d, "own": own}


def check_unicond2(params: MarketParams) -> ConditionEntry:
    """Two-sided chain guaranteeing every optimal cession lies strictly in (0,1)."""
    mu, S, gR = params.mu, params.Sigma, params.gamma_R
    t = kappa_terms(params)
    k, sg = float(t["k"]), float(t["sg"])
    n = params.n
    off = ~np.eye(n, dtype=bool)
    cross = k * np.outer(mu, mu) / sg - (gR + 1.0 / sg) * S
    pos_cross = np.where(off, np.maximum(cross, 0.0), 0.0).sum(axis=1)
    neg_cross = np.where(off, np.maximum(-cross, 0.0), 0.0).sum(axis=1)
    middle = np.where(off, k * np.outer(mu, mu) - S, 0.0).sum(axis=1) / sg
    left = -gR * np.diag(S) + pos_cross
    right = t["own"] - neg_cross
    lower = middle - left
    upper = right - middle
    slacks = np.minimum(lower, upper)
    return ConditionEntry.from_slacks(
        "unicond2",
        slacks,
        strict=True,
        details={"lower_slack": lower, "upper_slack": upper},
    )


def eta_min(params: MarketParams, p) -> np.ndarray:
    """Smallest nonnegative loadings meeting the reinsurer's participation constraint."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise NegativeP(f"cessions must be nonnegative, got {p}")
    return np.maximum(0.0, 0.5 * params.gamma_R * (params.Sigma @ p) / params.mu)


def check_wgcond(params: MarketParams) -> ConditionEntry:
    g, S = params.gamma, params.Sigma
    t = kappa_terms(params)
    k, sg = float(t["k"]), float(t["sg"])
    pos = np.maximum(S, 0.0)
    share = (1.0 / g) / sg
    lhs = g * (np.diag(S) - share**2 * pos.sum() - k * params.mu**2)
    rhs = params.gamma_R * pos.sum(axis=1)
    return ConditionEntry.from_slacks("WGcond", lhs - rhs, strict=False)


def member_surplus(params: MarketParams, A: np.ndarray) -> np.ndarray:
    """Welfare gain of each member before paying any loading."""
    return 0.5 * params.gamma * (params.variances - row_variances(A, params.Sigma))


def loadings_from_welfare(params: MarketParams, sol: ParetoSolution, targets) -> Contract:
    """Loadings that deliver the requested member welfare gains under (A_*, p_*)."""
    targets = np.asarray(targets, dtype=float)
    p = sol.p_star
    if np.any(np.abs(p) <= linalg.PIVOT_TOL):
        i = int(np.argmin(np.abs(p)))
        raise ZeroCession(f"member {i} cedes nothing; its loading is undetermined")
    eta = (member_surplus(params, sol.A_star) - targets) / (p * params.mu)
    return Contract(sol.A_star, p, eta)


@dataclass(frozen=True)
class EqualSplit:
    contract: Contract
    targets: np.ndarray
    surplus: float


def jpo_equal_split(params: MarketParams, sol: ParetoSolution, reference: Contract) -> EqualSplit:
    """Pareto contract giving every agent the reference gains plus an equal share of the gap."""
    base = welfare(params, reference)
    delta = total_welfare(params, sol.A_star, sol.p_star) - total_welfare(
        params, reference.A, reference.p
    )
    targets = base.omega_members + delta / (params.n + 1)
    return EqualSplit(loadings_from_welfare(params, sol, targets), targets, delta)


def single_loading_welfare(params: MarketParams, sol: ParetoSolution, t, grand_value: float):
    """Allocations (omega_1..omega_n, B(N) - sum omega) for each common loading in ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    members = member_surplus(params, sol.A_star)[None, :] - np.outer(t, sol.p_star * params.mu)
    reins = grand_value - members.sum(axis=1)
    return np.column_stack([members, reins])


@dataclass(frozen=True)
class LoadingSet:
    intervals: list[tuple[float, float]]
    entry: ConditionEntry

    @property
    def empty(self) -> bool:
        return not self.intervals

    def contains(self, t: float, tol: float = 0.0) -> bool:
        return any(lo - tol <= t <= hi + tol for lo, hi in self.intervals)


def single_loading_feasible_set(
    params: MarketParams,
    sol: ParetoSolution,
    game,
    dominance_target: WelfareReport | None = None,
    step: float = SCAN_STEP,
) -> LoadingSet:
    """Common loadings t >= 0 whose induced allocation is in the core.

    When ``dominance_target`` is given the allocation must also weakly improve
    on it for every agent. ``game`` must provide ``grand_value`` and
    ``core_ok(allocs)`` (vectorized core membership).
    """
    BN = game.grand_value
    surplus = member_surplus(params, sol.A_star)
    rates = sol.p_star * params.mu
    with np.errstate(divide="ignore"):
        caps = np.where(rates > 0, surplus / rates, np.inf)
    t_hi = float(np.min(caps))
    target = None if dominance_target is None else dominance_target.allocation()

    def ok(ts) -> np.ndarray:
        allocs = single_loading_welfare(params, sol, ts, BN)
        good = game.core_ok(allocs) & (np.atleast_1d(ts) >= 0)
        if target is not None:
            good &= np.all(allocs >= target - 1e-9, axis=1)
        return good

    notes = [
        "interval from the constructive argument is [max eta2, min eta1] "
        "for core points c1, c2 with min eta1 >= max eta2"
    ]
    if not np.isfinite(t_hi) or t_hi < 0:
        entry = ConditionEntry("single_loading", FAIL, float("-inf"), notes=notes)
        return LoadingSet([], entry)
    npts = int(np.ceil(t_hi / step)) + 1
    grid = np.linspace(0.0, t_hi, max(npts, 2))
    flags = ok(grid)

    def refine(a: float, b: float, a_ok: bool) -> float:
        # boundary between a (status a_ok) and b (status not a_ok)
        while b - a > REFINE_TOL:
            m = 0.5 * (a + b)
            if bool(ok(m)[0]) == a_ok:
                a = m
            else:
                b = m
        return a if a_ok else b

    intervals: list[tuple[float, float]] = []
    i = 0
    while i < len(grid):
        if not flags[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(grid) and flags[j + 1]:
            j += 1
        lo = grid[i] if i == 0 else refine(grid[i - 1], grid[i], False)
        hi = grid[j] if j == len(grid) - 1 else refine(grid[j], grid[j + 1], True)
        intervals.append((float(lo), float(hi)))
        i = j + 1

    if intervals:
        width = max(hi - lo for lo, hi in intervals)
        entry = ConditionEntry("single_loading", PASS, width, notes=notes,
                               details={"intervals": [list(iv) for iv in intervals]})
    else:
        entry = ConditionEntry("single_loading", FAIL, 0.0, notes=notes + ["no feasible t"])
    return LoadingSet(intervals, entry)


def single_loading_interval(
    params: MarketParams, sol: ParetoSolution, c1, c2
) -> tuple[float, float] | None:
    """Common-loading range bracketed by the loadings of two core points.

    Returns [max eta2, min eta1] when min eta1 >= max eta2, otherwise None.
    """
    n = params.n
    eta1 = loadings_from_welfare(params, sol, np.asarray(c1)[:n]).eta
    eta2 = loadings_from_welfare(params, sol, np.asarray(c2)[:n]).eta
    lo, hi = float(np.max(eta2)), float(np.min(eta1))
    return (lo, hi) if hi >= lo else None
