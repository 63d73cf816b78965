"""Leader-follower pricing: the reinsurer sets loadings, the pool replies optimally."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .conditions import FAIL, INCONCLUSIVE, PASS, ConditionEntry, ConditionReport
from .market import Contract, MarketParams, check_feasibility, total_welfare, welfare
from .pareto import ParetoSolution, kappa_terms, mbar_raw, mutualization


class SingularSystem(linalg.LinAlgError):
    pass


class KappaNonpositive(ValueError):
    def __init__(self, kappa: np.ndarray):
        super().__init__(f"row margins kappa = {kappa} are not all positive")
        self.kappa = kappa


class ParamsMismatch(ValueError):
    pass


def follower_matrix(params: MarketParams) -> np.ndarray:
    """M = Mbar - gamma_R Sigma; the pool's response is p = 1 - M^{-1} D(mu) eta."""
    Mbar, _ = mbar_raw(params.mu, params.Sigma, params.gamma, params.gamma_R)
    M = Mbar - params.gamma_R * params.Sigma
    return 0.5 * (M + M.T)


def _solve(m, b) -> np.ndarray:
    try:
        return linalg.solve(m, b)
    except linalg.Singular as exc:
        raise SingularSystem(str(exc)) from exc


def in_unit_box(p) -> bool:
    p = np.asarray(p)
    return bool(np.all(p > 0) and np.all(p < 1))


def follower(params: MarketParams, eta) -> Contract:
    """Pool's optimal reply to loadings ``eta``. Cessions outside (0,1) are left as they are."""
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (params.n,)).copy()
    M = follower_matrix(params)
    p = 1.0 - _solve(M, params.mu * eta)
    return Contract(mutualization(params, p), p, eta)


def check_unicond(params: MarketParams, eta) -> ConditionEntry:
    """Loading window that keeps the pool's cessions strictly inside (0,1)."""
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (params.n,))
    t = kappa_terms(params)
    sg = float(t["sg"])
    d = t["d"]
    off = ~np.eye(params.n, dtype=bool)
    pos = np.where(off, np.maximum(d, 0.0), 0.0).sum(axis=1)
    neg = np.where(off, np.maximum(-d, 0.0), 0.0).sum(axis=1)
    charge = params.mu * eta
    lower = charge - pos / sg
    upper = t["own"] - neg / sg - charge
    # same window with the lower bound scaled by the tolerance of the other members only
    sg_others = sg - 1.0 / params.gamma
    lower_alt = charge - pos / sg_others
    return ConditionEntry.from_slacks(
        "unicond",
        np.minimum(lower, upper),
        strict=True,
        details={"lower_slack": lower, "upper_slack": upper, "lower_slack_others": lower_alt},
    )


def check_mircond(params: MarketParams) -> ConditionEntry:
    mu, S, g = params.mu, params.Sigma, params.gamma
    t = kappa_terms(params)
    k, sg = float(t["k"]), float(t["sg"])
    var = np.diag(S)
    share = (1.0 / g) / sg
    first = 0.5 * g * (var - share**2 * np.maximum(S, 0.0).sum() - 3.0 * k * mu**2)
    off = ~np.eye(params.n, dtype=bool)
    neg = np.where(off, np.maximum(k * np.outer(mu, mu) - S, 0.0), 0.0).sum(axis=1)
    second = (neg + k * mu**2 - var) / sg
    return ConditionEntry.from_slacks("MIRcond", first + second, strict=False)


def check_deltaine(params: MarketParams) -> ConditionEntry:
    """Diagonal-dominance test that guarantees nonnegative optimal loadings."""
    M = follower_matrix(params)
    S = params.Sigma
    gR = params.gamma_R
    dM = float(np.min(linalg.diag_dominance_margins(M)))
    dS = float(np.min(linalg.diag_dominance_margins(S)))
    norm = linalg.inf_norm(S)
    details = {"delta_M": dM, "delta_Sigma": dS, "sigma_inf_norm": norm}
    if dM <= 0 or dS <= 0:
        return ConditionEntry(
            "deltaINE",
            INCONCLUSIVE,
            min(dM, dS),
            notes=["M or Sigma is not strictly diagonally dominant; no conclusion on eta >= 0"],
            details=details,
        )
    lhs = dM + 0.5 * gR * dS
    rhs = gR**2 * norm**2 / (2.0 * (2.0 * dM + gR * dS))
    details.update(lhs=lhs, rhs=rhs)
    return ConditionEntry("deltaINE", PASS if lhs >= rhs else FAIL, lhs - rhs, details=details)


def check_single_nonneg(params: MarketParams) -> ConditionEntry:
    """gamma_R <= delta_M / ||Sigma||_inf, sufficient for a nonnegative common loading."""
    M = follower_matrix(params)
    dM = float(np.min(linalg.diag_dominance_margins(M)))
    limit = dM / linalg.inf_norm(params.Sigma)
    return ConditionEntry(
        "single_loading_nonneg",
        PASS if params.gamma_R <= limit else FAIL,
        limit - params.gamma_R,
        details={"delta_M": dM, "gamma_R_limit": limit},
    )


@dataclass(frozen=True)
class BowleySolution:
    params: MarketParams
    M: np.ndarray
    eta_star: np.ndarray
    A_star: np.ndarray
    p_star: np.ndarray
    single_loading: float | None
    omega_R_closed: float
    condition_report: ConditionReport

    @property
    def contract(self) -> Contract:
        return Contract(self.A_star, self.p_star, self.eta_star)

    @property
    def bowley_optimal(self) -> bool:
        """Direct IR of every agent at the optimum (the sufficient conditions are advisory)."""
        return self.condition_report["ir_direct"].passed


def omega_r_closed(params: MarketParams, M: np.ndarray) -> float:
    one = np.ones(params.n)
    Minv = linalg.invert(M)
    inner = params.gamma_R * Minv @ params.Sigma @ Minv + 2.0 * Minv
    return 0.5 * float(one @ _solve(inner, one))


def _direct_entries(params: MarketParams, contract: Contract) -> list[ConditionEntry]:
    feas = check_feasibility(params, contract)
    w = welfare(params, contract)
    entries = [
        ConditionEntry(
            "feasibility",
            PASS if feas.ok else FAIL,
            feas.margin,
            advisory=False,
        ),
        ConditionEntry.from_slacks("ir_direct", w.allocation(), strict=False, advisory=False),
        ConditionEntry.from_slacks(
            "p_interior",
            np.minimum(contract.p, 1.0 - contract.p),
            strict=True,
            advisory=False,
        ),
    ]
    return entries


def _assemble(params: MarketParams, M: np.ndarray, eta: np.ndarray, single: float | None) -> BowleySolution:
    c = follower(params, eta)
    report = ConditionReport()
    report.add(check_unicond(params, eta))
    report.add(check_mircond(params))
    if single is None:
        report.add(check_deltaine(params))
    else:
        report.add(check_single_nonneg(params))
    report.add(
        ConditionEntry.from_slacks("eta_nonnegative", eta, strict=False, advisory=False)
    )
    report.extend(_direct_entries(params, c))
    return BowleySolution(
        params, M, eta, c.A, c.p, single, omega_r_closed(params, M), report
    )


def _require_pd(M: np.ndarray) -> None:
    try:
        linalg.cholesky(M)
    except linalg.NotPositiveDefinite as exc:
        raise SingularSystem(f"follower matrix is not positive definite: {exc}") from exc


def leader(params: MarketParams) -> BowleySolution:
    """Loadings that maximize the reinsurer's gain given the pool's reply."""
    M = follower_matrix(params)
    _require_pd(M)
    gS = params.gamma_R * params.Sigma
    one = np.ones(params.n)
    eta = (M @ _solve(gS + 2.0 * M, (gS + M) @ one)) / params.mu
    return _assemble(params, M, eta, None)


def single_loading_value(params: MarketParams, M: np.ndarray | None = None) -> float:
    M = follower_matrix(params) if M is None else M
    mu, S, gR = params.mu, params.Sigma, params.gamma_R
    one = np.ones(params.n)
    Minv_mu = _solve(M, mu)
    num = float(mu @ one + gR * Minv_mu @ (S @ one))
    den = float(2.0 * mu @ Minv_mu + gR * Minv_mu @ S @ Minv_mu)
    return num / den


def leader_single(params: MarketParams) -> BowleySolution:
    """Best common loading t, charged to every member."""
    M = follower_matrix(params)
    _require_pd(M)
    t = single_loading_value(params, M)
    return _assemble(params, M, np.full(params.n, t), t)


def optimal_reply_identity(params: MarketParams, M: np.ndarray | None = None) -> np.ndarray:
    """(gamma_R Sigma + 2M)^{-1} M 1, the pool's cessions at the optimal loadings."""
    M = follower_matrix(params) if M is None else M
    return _solve(params.gamma_R * params.Sigma + 2.0 * M, M @ np.ones(params.n))


def varah_bound(params: MarketParams) -> tuple[float, np.ndarray]:
    """Entrywise bound on |gamma_R^2 [Sigma W^{-1} Sigma 1]| with W = gamma_R Sigma + 2M.

    Uses the row quantities kappa_i, which understate the true dominance margins
    of W; they must all be positive for the bound to be formed.
    """
    mu, S, g, gR = params.mu, params.Sigma, params.gamma, params.gamma_R
    t = kappa_terms(params)
    k, sg = float(t["k"]), float(t["sg"])
    var = np.diag(S)
    offabs = np.abs(S).sum(axis=1) - np.abs(var)
    kappa = (
        (gR + 2.0 / sg) * (var - offabs)
        + 2.0 * k * mu**2 * (g - 1.0 / sg)
        + 2.0 * k * mu / sg * (mu.sum() - mu)
    )
    if np.min(kappa) <= 0:
        raise KappaNonpositive(kappa)
    bound = gR**2 * linalg.inf_norm(S) / float(np.min(kappa)) * float(np.max(np.abs(S.sum(axis=1))))
    return bound, kappa


def spectral_bound(params: MarketParams) -> tuple[float, float]:
    """Bound through the smallest eigenvalue of L^{-1} M L^{-T}, with Sigma = L L^T."""
    M = follower_matrix(params)
    L = linalg.cholesky(params.Sigma)
    n = params.n
    Linv = np.column_stack([linalg.forward_substitution(L, e) for e in np.eye(n)])
    C = Linv @ M @ Linv.T
    lam = float(linalg.eigen_sym(0.5 * (C + C.T))[0])
    gR = params.gamma_R
    bound = gR**2 / (gR + 2.0 * lam) * float(np.linalg.norm(params.Sigma @ np.ones(n)))
    return bound, lam


def loading_window_bounds(params: MarketParams) -> ConditionReport:
    """Explicit checks of the loading window at the optimal loadings.

    With a risk-neutral reinsurer the optimal charge is half of M 1 and the
    window reduces to a closed inequality. Otherwise the implicit term
    gamma_R^2 [Sigma W^{-1} Sigma 1] is bounded two ways and the window is
    checked with the tighter bound.
    """
    mu, S, gR = params.mu, params.Sigma, params.gamma_R
    n = params.n
    M = follower_matrix(params)
    t = kappa_terms(params)
    sg = float(t["sg"])
    X = t["own"]
    off = ~np.eye(n, dtype=bool)
    absd = np.where(off, np.abs(t["d"]), 0.0).sum(axis=1) / sg
    report = ConditionReport()
    eta = leader(params).eta_star

    if gR == 0.0:
        charge = mu * eta
        half = 0.5 * (M @ np.ones(n))
        report.add(
            ConditionEntry.from_slacks(
                "unicond_riskneutral",
                X - absd,
                strict=True,
                details={"charge": charge, "half_M1": half, "max_gap": float(np.max(np.abs(charge - half)))},
            )
        )
        return report

    W = gR * S + 2.0 * M
    T = S @ _solve(W, S @ np.ones(n))
    exact = np.abs(gR**2 * T)
    rowsum = S.sum(axis=1)
    shift = 0.5 * gR * rowsum - 0.5 * gR**2 * T
    sums = t["d"].sum(axis=1) / sg
    equivalent = X - absd - np.abs(shift)
    alternate = X - np.maximum(absd - shift, sums + shift)
    report.add(
        ConditionEntry.from_slacks(
            "unicond_exact",
            equivalent,
            strict=True,
            details={"implicit_term": exact, "alternate_form_slack": alternate},
        )
    )

    bounds: dict[str, float] = {}
    try:
        vb, kappa = varah_bound(params)
        bounds["varah"] = vb
        report.add(
            ConditionEntry.from_slacks(
                "varah_bound",
                vb - exact,
                strict=False,
                details={
                    "bound": vb,
                    "kappa": kappa,
                    "W_dominance_margin": linalg.diag_dominance_margins(W),
                },
            )
        )
    except KappaNonpositive as exc:
        report.add(
            ConditionEntry(
                "varah_bound",
                INCONCLUSIVE,
                float(np.min(exc.kappa)),
                notes=["kappa not positive; Varah route unavailable"],
                details={"kappa": exc.kappa},
            )
        )
    sb, lam = spectral_bound(params)
    bounds["spectral"] = sb
    report.add(
        ConditionEntry.from_slacks(
            "spectral_bound", sb - exact, strict=False, details={"bound": sb, "lambda_min": lam}
        )
    )
    tighter = min(bounds, key=bounds.get)
    b = bounds[tighter]
    verified = X - absd - 0.5 * gR * np.abs(rowsum) - 0.5 * b
    report.add(
        ConditionEntry.from_slacks(
            "unicond_by_bound",
            verified,
            strict=True,
            notes=[f"tighter bound: {tighter}"],
            details={"bound_used": b},
        )
    )
    return report


@dataclass(frozen=True)
class Comparison:
    p_gap: np.ndarray
    total_welfare_gap: float
    bowley_is_jpo: bool


def compare(params: MarketParams, pareto: ParetoSolution, bowley: BowleySolution) -> Comparison:
    if not bowley.params.same_as(params):
        raise ParamsMismatch("Bowley solution was computed for different parameters")
    Mbar, _ = mbar_raw(params.mu, params.Sigma, params.gamma, params.gamma_R)
    if pareto.Mbar.shape != Mbar.shape or not np.allclose(pareto.Mbar, Mbar, rtol=1e-12, atol=0):
        raise ParamsMismatch("Pareto solution was computed for different parameters")
    gap = total_welfare(params, pareto.A_star, pareto.p_star) - total_welfare(
        params, bowley.A_star, bowley.p_star
    )
    p_gap = pareto.p_star - bowley.p_star
    same = bool(
        np.max(np.abs(p_gap)) <= 1e-8 and np.max(np.abs(pareto.A_star - bowley.A_star)) <= 1e-8
    )
    return Comparison(p_gap, float(gap), same)
