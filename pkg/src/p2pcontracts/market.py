"""Pool description, contracts, and the preference/welfare evaluations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg

FEASIBILITY_TOL = 1e-8
IR_SLACK = -1e-10


class ValidationError(ValueError):
    """Invalid market parameters; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MarketParams:
    mu: np.ndarray
    Sigma: np.ndarray
    gamma: np.ndarray
    gamma_R: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        Sigma = np.asarray(self.Sigma, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "gamma_R", float(self.gamma_R))
        _validate(mu, Sigma, gamma, self.gamma_R)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.Sigma).copy()

    def with_gamma_R(self, gamma_R: float) -> "MarketParams":
        return MarketParams(self.mu, self.Sigma, self.gamma, gamma_R)

    def status_quo_disutility(self) -> np.ndarray:
        """mu_i + gamma_i sigma_i^2 / 2, each member bearing its own loss."""
        return self.mu + 0.5 * self.gamma * self.variances

    def same_as(self, other: "MarketParams") -> bool:
        return (
            self.n == other.n
            and self.gamma_R == other.gamma_R
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.Sigma, other.Sigma)
            and np.array_equal(self.gamma, other.gamma)
        )


def _validate(mu, Sigma, gamma, gamma_R) -> None:
    if mu.ndim != 1:
        raise ValidationError("mu", "must be a vector")
    n = mu.shape[0]
    if n < 2:
        raise ValidationError("mu", f"need at least 2 members, got {n}")
    if gamma.shape != (n,):
        raise ValidationError("gamma", f"length {gamma.shape[0] if gamma.ndim else 0} != {n}")
    if Sigma.shape != (n, n):
        raise ValidationError("sigma", f"shape {Sigma.shape} != ({n}, {n})")
    for name, arr in (("mu", mu), ("sigma", Sigma), ("gamma", gamma)):
        if not np.all(np.isfinite(arr)):
            raise ValidationError(name, "non-finite entry")
    if not np.isfinite(gamma_R) or gamma_R < 0:
        raise ValidationError("gamma_r", "must be a finite nonnegative number")
    for i in range(n):
        if mu[i] <= 0:
            raise ValidationError(f"mu[{i}]", "expected loss must be positive")
        if gamma[i] <= 0:
            raise ValidationError(f"gamma[{i}]", "risk aversion must be positive")
        if Sigma[i, i] <= 0:
            raise ValidationError(f"sigma[{i}][{i}]", "variance must be positive")
    if not linalg.is_symmetric(Sigma):
        raise ValidationError("sigma", "NotSymmetric")
    try:
        linalg.cholesky(Sigma)
    except linalg.NotPositiveDefinite as exc:
        raise ValidationError("sigma", f"NotPositiveDefinite (pivot {exc.pivot_index})") from exc


def baseline() -> MarketParams:
    """Three-member pool used for the reported tables."""
    return MarketParams(
        mu=np.array([100.0, 125.0, 85.0]),
        Sigma=np.array(
            [[10000.0, -1200.0, 720.0], [-1200.0, 14400.0, 648.0], [720.0, 648.0, 8100.0]]
        ),
        gamma=np.array([0.015, 0.025, 0.02]),
        gamma_R=0.01,
    )


def random_market(rng: np.random.Generator, n: int, gamma_R: float | None = None) -> MarketParams:
    """Random pool with Sigma = B^T B + eps I, loss sizes comparable to the baseline."""
    B = rng.normal(scale=60.0, size=(n, n))
    Sigma = B.T @ B + 500.0 * np.eye(n)
    mu = rng.uniform(50.0, 150.0, size=n)
    gamma = rng.uniform(0.005, 0.04, size=n)
    if gamma_R is None:
        gamma_R = rng.uniform(0.0, 0.05)
    return MarketParams(mu, Sigma, gamma, gamma_R)


@dataclass(frozen=True, eq=False)
class Contract:
    """Mutualization matrix A, ceded proportions p, safety loadings eta."""

    A: np.ndarray
    p: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def with_eta(self, eta) -> "Contract":
        return Contract(self.A, self.p, np.broadcast_to(np.asarray(eta, float), self.p.shape).copy())


def status_quo(n: int) -> Contract:
    return Contract(np.eye(n), np.zeros(n), np.zeros(n))


def _check_dims(params: MarketParams, contract: Contract) -> None:
    n = params.n
    if contract.A.shape != (n, n) or contract.p.shape != (n,) or contract.eta.shape != (n,):
        raise DimensionMismatch(
            f"contract shapes A{contract.A.shape} p{contract.p.shape} "
            f"eta{contract.eta.shape} do not fit n = {n}"
        )


def row_variances(A: np.ndarray, Sigma: np.ndarray) -> np.ndarray:
    """A_i Sigma A_i^T for every row i."""
    return np.einsum("ij,jk,ik->i", A, Sigma, A)


def member_disutility(params: MarketParams, A: np.ndarray) -> np.ndarray:
    return A @ params.mu + 0.5 * params.gamma * row_variances(A, params.Sigma)


def reinsurer_disutility(params: MarketParams, p: np.ndarray) -> float:
    return float(params.mu @ p + 0.5 * params.gamma_R * p @ params.Sigma @ p)


def premiums(params: MarketParams, contract: Contract) -> np.ndarray:
    return (1.0 + contract.eta) * contract.p * params.mu


@dataclass(frozen=True)
class Evaluation:
    rho_members: np.ndarray
    rho_R: float
    premiums: np.ndarray
    u_members: np.ndarray
    u_total: float
    v_reinsurer: float


def evaluate(params: MarketParams, contract: Contract) -> Evaluation:
    """Raw preference evaluation; the contract need not be feasible."""
    _check_dims(params, contract)
    rho = member_disutility(params, contract.A)
    pi = premiums(params, contract)
    u = rho + pi
    p = contract.p
    v = 0.5 * params.gamma_R * p @ params.Sigma @ p - (params.mu * contract.eta) @ p
    return Evaluation(
        rho_members=rho,
        rho_R=reinsurer_disutility(params, p),
        premiums=pi,
        u_members=u,
        u_total=float(np.sum(u)),
        v_reinsurer=float(v),
    )


@dataclass(frozen=True)
class Feasibility:
    zero_conserving_residual: float
    fairness_residual: float
    ok: bool

    @property
    def margin(self) -> float:
        """Worst residual, negated so that larger is better."""
        return 0.0 - max(self.zero_conserving_residual, self.fairness_residual)


def check_feasibility(params: MarketParams, contract: Contract) -> Feasibility:
    _check_dims(params, contract)
    one = np.ones(params.n)
    zc = float(np.max(np.abs(one @ contract.A + contract.p - one)))
    fair = float(
        np.max(np.abs(contract.A @ params.mu + params.mu * contract.p - params.mu))
    )
    scale = max(1.0, float(np.max(np.abs(params.mu))))
    ok = zc <= FEASIBILITY_TOL and fair <= FEASIBILITY_TOL * scale
    return Feasibility(zc, fair, ok)


@dataclass(frozen=True)
class WelfareReport:
    omega_members: np.ndarray
    omega_reinsurer: float
    total: float
    ir_members: tuple[bool, ...]
    ir_reinsurer: bool
    feasible: bool

    @property
    def all_ir(self) -> bool:
        return all(self.ir_members) and self.ir_reinsurer

    def allocation(self) -> np.ndarray:
        """Members' gains followed by the reinsurer's."""
        return np.append(self.omega_members, self.omega_reinsurer)


def welfare(params: MarketParams, contract: Contract) -> WelfareReport:
    """Welfare gains relative to the status quo.

    Uses the fairness-reduced member form, so an infeasible contract is still
    evaluated but carries ``feasible=False``.
    """
    _check_dims(params, contract)
    feas = check_feasibility(params, contract)
    A, p, eta = contract.A, contract.p, contract.eta
    omega = 0.5 * params.gamma * (params.variances - row_variances(A, params.Sigma))
    omega = omega - eta * p * params.mu
    omega_R = float((params.mu * eta) @ p - 0.5 * params.gamma_R * p @ params.Sigma @ p)
    return WelfareReport(
        omega_members=omega,
        omega_reinsurer=omega_R,
        total=float(np.sum(omega) + omega_R),
        ir_members=tuple(bool(w >= IR_SLACK) for w in omega),
        ir_reinsurer=bool(omega_R >= IR_SLACK),
        feasible=feas.ok,
    )


def total_welfare(params: MarketParams, A: np.ndarray, p: np.ndarray) -> float:
    """Pool-wide disutility reduction; independent of the loadings."""
    return float(
        np.sum(params.status_quo_disutility())
        - np.sum(member_disutility(params, A))
        - reinsurer_disutility(params, p)
    )
