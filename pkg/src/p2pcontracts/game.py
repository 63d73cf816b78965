"""Transferable-utility game among the members and the reinsurer.

Coalitions are bitmasks over n + 1 agents: bit i is member i and bit n
(the high bit) is the reinsurer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import lp, oracle
from .conditions import ConditionEntry
from .market import Contract, MarketParams, row_variances, welfare
from .pareto import ParetoSolution, eta_min, mutualization_raw, solve_raw, solve_rs

MAX_MEMBERS = 16
EFFICIENCY_RTOL = 1e-7
COALITION_SLACK = -1e-9
ORACLE_RTOL = 1e-7
JP_TOL = 1e-7


class EmptyCoalition(ValueError):
    pass


class TooManyMembers(ValueError):
    pass


class GameInvariantError(ValueError):
    pass


def coalition_label(mask: int, n: int) -> str:
    names = [str(i + 1) for i in range(n) if mask >> i & 1]
    if mask >> n & 1:
        names.append("R")
    return "{" + ",".join(names) + "}"


def members_of(mask: int, n: int) -> list[int]:
    return [i for i in range(n) if mask >> i & 1]


def _status_quo(mu, Sigma, gamma) -> float:
    return float(np.sum(mu + 0.5 * gamma * np.diag(Sigma)))


def _members_cost(mu, Sigma, gamma, A) -> float:
    return float(np.sum(A @ mu + 0.5 * gamma * row_variances(A, Sigma)))


def _value_with_reinsurer(mu, S, g, gR) -> tuple[float, np.ndarray, np.ndarray]:
    raw = solve_raw(mu, S, g, gR)
    cost = _members_cost(mu, S, g, raw.A) + float(mu @ raw.p + 0.5 * gR * raw.p @ S @ raw.p)
    return _status_quo(mu, S, g) - cost, raw.A, raw.p


def _value_alone(mu, S, g) -> tuple[float, np.ndarray]:
    A = mutualization_raw(mu, S, g, np.zeros(mu.shape[0]))
    return _status_quo(mu, S, g) - _members_cost(mu, S, g, A), A


def alone_allocation_by_size(mu, S, g) -> np.ndarray:
    """Variant of the no-reinsurer sharing rule that weights by coalition size.

    Kept only to document that it breaks zero conservation; the harmonic
    weighting sum_j 1/gamma_j is the one that matches the KKT solution.
    """
    n = mu.shape[0]
    sg = float(np.sum(1.0 / g))
    Sinv_mu = np.linalg.solve(S, mu)
    k = 1.0 / float(mu @ Sinv_mu)
    P = np.outer(1.0 / g, np.ones(n)) / sg
    Q = np.outer(1.0 / g, np.ones(n)) / n
    return P + k * (np.eye(n) - Q) @ np.outer(mu, Sinv_mu)


def coalition_value(params: MarketParams, S, with_reinsurer: bool) -> float:
    """Largest total welfare gain the members in S (and optionally R) can secure."""
    idx = sorted(set(int(i) for i in S))
    if not idx:
        if with_reinsurer:
            return 0.0
        raise EmptyCoalition("a coalition without the reinsurer needs at least one member")
    mu = params.mu[idx]
    Sig = params.Sigma[np.ix_(idx, idx)]
    g = params.gamma[idx]
    if with_reinsurer:
        return _value_with_reinsurer(mu, Sig, g, params.gamma_R)[0]
    if len(idx) == 1:
        return 0.0
    return _value_alone(mu, Sig, g)[0]


@dataclass(frozen=True)
class CoreCheck:
    in_core: bool
    efficiency_gap: float
    violated: list[tuple[int, float]]

    def labels(self, n: int) -> list[str]:
        return [coalition_label(m, n) for m, _ in self.violated]


@dataclass
class CoalitionGame:
    n: int
    values: dict[int, float]
    notes: list[str] = field(default_factory=list)

    @property
    def reinsurer_bit(self) -> int:
        return 1 << self.n

    @property
    def full_mask(self) -> int:
        return (1 << (self.n + 1)) - 1

    @property
    def grand_value(self) -> float:
        return self.values[self.full_mask]

    @property
    def members_value(self) -> float:
        return self.values[self.full_mask ^ self.reinsurer_bit]

    def value(self, mask: int) -> float:
        return self.values[mask]

    def _proper(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        cached = getattr(self, "_proper_cache", None)
        if cached is None:
            masks = np.arange(1, self.full_mask)
            bits = (masks[:, None] >> np.arange(self.n + 1)) & 1
            worth = np.array([self.values[int(m)] for m in masks])
            cached = (masks, bits.astype(float), worth)
            self._proper_cache = cached
        return cached

    def core_slacks(self, allocs) -> np.ndarray:
        """Sum of c over each proper coalition minus its worth; one row per allocation."""
        _, bits, worth = self._proper()
        return np.atleast_2d(allocs) @ bits.T - worth

    def core_ok(self, allocs, atol: float = 0.0) -> np.ndarray:
        allocs = np.atleast_2d(np.asarray(allocs, dtype=float))
        eff = np.abs(allocs.sum(axis=1) - self.grand_value) <= max(
            EFFICIENCY_RTOL * abs(self.grand_value), atol
        )
        slack_ok = np.all(self.core_slacks(allocs) >= COALITION_SLACK - atol, axis=1)
        return eff & slack_ok

    def to_json(self) -> str:
        return json.dumps(
            {"n": self.n, "values": {str(m): v for m, v in sorted(self.values.items())}}
        )

    @classmethod
    def from_json(cls, text: str) -> "CoalitionGame":
        data = json.loads(text)
        return cls(int(data["n"]), {int(k): float(v) for k, v in data["values"].items()})


def build_game(params: MarketParams, verify: bool = True) -> CoalitionGame:
    """Evaluate every coalition; with ``verify`` each value is checked against the KKT oracle."""
    n = params.n
    if n > MAX_MEMBERS:
        raise TooManyMembers(f"coalition enumeration is limited to n <= {MAX_MEMBERS}")
    R = 1 << n
    values = {0: 0.0, R: 0.0}
    notes: list[str] = []
    scale = max(1.0, float(np.sum(params.status_quo_disutility())))
    worst_alone = 0.0
    for mask in range(1, R):
        idx = members_of(mask, n)
        mu = params.mu[idx]
        Sig = params.Sigma[np.ix_(idx, idx)]
        g = params.gamma[idx]
        with_r, A_r, p_r = _value_with_reinsurer(mu, Sig, g, params.gamma_R)
        if len(idx) == 1:
            alone, A_a = 0.0, np.ones((1, 1))
        else:
            alone, A_a = _value_alone(mu, Sig, g)
        values[mask | R] = with_r
        values[mask] = alone
        if verify:
            A_o, p_o = oracle.kkt_solve_rs_raw(mu, Sig, g, params.gamma_R)
            gap = max(np.max(np.abs(A_o - A_r)), np.max(np.abs(p_o - p_r)))
            if gap > ORACLE_RTOL * max(1.0, np.max(np.abs(A_o))):
                raise GameInvariantError(
                    f"reinsured value of {coalition_label(mask | R, n)} disagrees with the oracle by {gap:.3g}"
                )
            if len(idx) > 1:
                A2 = oracle.kkt_solve_rs2(mu, Sig, g)
                gap = float(np.max(np.abs(A2 - A_a)))
                worst_alone = max(worst_alone, gap)
                if gap > ORACLE_RTOL * max(1.0, np.max(np.abs(A2))):
                    by_size = alone_allocation_by_size(mu, Sig, g)
                    raise GameInvariantError(
                        f"members-only value of {coalition_label(mask, n)} disagrees with the oracle "
                        f"(harmonic weighting gap {gap:.3g}, size weighting gap "
                        f"{np.max(np.abs(A2 - by_size)):.3g})"
                    )
    if verify:
        notes.append(
            f"members-only sharing uses harmonic weights; max gap to oracle {worst_alone:.3g}"
        )
    tol = 1e-8 * scale
    for mask in range(R):
        if values[mask] < -tol or values[mask | R] < -tol:
            raise GameInvariantError(f"negative worth at {coalition_label(mask, n)}")
        if values[mask | R] < values[mask] - tol:
            raise GameInvariantError(
                f"adding the reinsurer lowers the worth of {coalition_label(mask, n)}"
            )
    return CoalitionGame(n, values, notes)


def check_core(game: CoalitionGame, alloc, atol: float = 0.0) -> CoreCheck:
    """Efficiency within max(1e-7 B(N), atol) and every coalition constraint within -1e-9 - atol."""
    c = np.asarray(alloc, dtype=float)
    if c.shape != (game.n + 1,):
        raise ValueError(f"allocation needs {game.n + 1} entries, got {c.shape}")
    gap = float(c.sum() - game.grand_value)
    eff_ok = abs(gap) <= max(EFFICIENCY_RTOL * abs(game.grand_value), atol)
    masks, _, _ = game._proper()
    slacks = game.core_slacks(c)[0]
    bad = np.flatnonzero(slacks < COALITION_SLACK - atol)
    violated = sorted(((int(masks[j]), float(slacks[j])) for j in bad), key=lambda t: t[1])
    return CoreCheck(eff_ok and not violated, gap, violated)


def find_core_element(game: CoalitionGame) -> np.ndarray:
    """A core allocation, found through the dual of the cheapest coalition-proof allocation.

    The dual max sum_C B(C) y_C s.t. sum_{C containing i} y_C <= 1 has a
    feasible slack basis; its prices are the cheapest allocation c meeting
    every proper-coalition constraint. The core is nonempty iff sum c <= B(N),
    and the leftover is then spread evenly.
    """
    masks, bits, worth = game._proper()
    res = lp.maximize_ub(np.maximum(worth, 0.0), bits.T, np.ones(game.n + 1))
    c = res.duals
    total = float(c.sum())
    BN = game.grand_value
    if total > BN + EFFICIENCY_RTOL * max(1.0, abs(BN)):
        raise lp.Infeasible(
            f"balanced weights give {total:.6g} > B(N) = {BN:.6g}; the core is empty",
            certificate=res.x,
        )
    c = c + (BN - total) / (game.n + 1)
    check = check_core(game, c)
    if not check.in_core:
        raise lp.Infeasible("recovered allocation fails the core check", certificate=res.x)
    return c


def check_core_bound(params: MarketParams, sol: ParetoSolution, game: CoalitionGame) -> ConditionEntry:
    """Per-member slack: welfare at the minimal loadings minus marginal contribution."""
    eta = eta_min(params, np.maximum(sol.p_star, 0.0))
    omega = welfare(params, sol.contract(eta)).omega_members
    full = game.full_mask
    marginal = np.array([game.grand_value - game.value(full ^ (1 << i)) for i in range(game.n)])
    return ConditionEntry.from_slacks(
        "coreBound",
        omega - marginal,
        strict=False,
        details={"marginal_contribution": marginal, "minimal_loading_welfare": omega},
    )


@dataclass(frozen=True)
class Stability:
    stable: bool
    jp_optimal: bool
    core: CoreCheck
    blocking: int | None


def check_stability(
    params: MarketParams, game: CoalitionGame, contract: Contract, sol: ParetoSolution | None = None
) -> Stability:
    """JP-optimal sharing plus a core allocation of the induced gains."""
    sol = sol or solve_rs(params)
    jp = bool(
        np.max(np.abs(contract.A - sol.A_star)) <= JP_TOL
        and np.max(np.abs(contract.p - sol.p_star)) <= JP_TOL
    )
    omega = welfare(params, contract).omega_members
    alloc = np.append(omega, game.grand_value - omega.sum())
    core = check_core(game, alloc)
    blocking = core.violated[0][0] if core.violated else None
    return Stability(jp and core.in_core, jp, core, blocking)
