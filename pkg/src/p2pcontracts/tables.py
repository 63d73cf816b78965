"""The five benchmark contracts, their comparison tables, and the gamma_R sweep."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import bowley, game, pareto
from .conditions import ConditionEntry, ConditionReport, PASS, FAIL
from .market import Contract, MarketParams, check_feasibility, evaluate, total_welfare, welfare
from .output import Table

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Benchmarks:
    params: MarketParams
    pareto: pareto.ParetoSolution
    bo1: bowley.BowleySolution
    bo2: bowley.BowleySolution
    game: game.CoalitionGame
    jpo1: Contract
    jpo2: Contract
    jpo2_t: float
    jpo2_set: pareto.LoadingSet
    no_reinsurer: Contract

    def contracts(self) -> dict[str, Contract]:
        return {
            "JPO1": self.jpo1,
            "JPO2": self.jpo2,
            "BO1": self.bo1.contract,
            "BO2": self.bo2.contract,
        }


def benchmarks(params: MarketParams, jpo2_t: float | None = None) -> Benchmarks:
    """JPO1, JPO2, BO1, BO2 and the members-only contract.

    JPO1 splits the Pareto surplus over BO1 equally. JPO2 charges one common
    loading; without ``jpo2_t`` it takes the midpoint of the first interval of
    loadings that keep the gains in the core and above BO2.
    """
    sol = pareto.solve_rs(params)
    bo1 = bowley.leader(params)
    bo2 = bowley.leader_single(params)
    g = game.build_game(params)
    jpo1 = pareto.jpo_equal_split(params, sol, bo1.contract).contract
    feasible = pareto.single_loading_feasible_set(params, sol, g, welfare(params, bo2.contract))
    if jpo2_t is None:
        if feasible.empty:
            raise ValueError("no common loading keeps the gains in the core and above BO2")
        lo, hi = feasible.intervals[0]
        jpo2_t = 0.5 * (lo + hi)
        log.info("JPO2 loading defaulted to %.6f (midpoint of [%.6f, %.6f])", jpo2_t, lo, hi)
    jpo2 = sol.contract(jpo2_t)
    n = params.n
    A0 = pareto.no_reinsurer_allocation(params)
    none = Contract(A0, np.zeros(n), np.zeros(n))
    return Benchmarks(params, sol, bo1, bo2, g, jpo1, jpo2, float(jpo2_t), feasible, none)


def _idx(prefix: str, n: int) -> list[str]:
    return [f"{prefix}_{i + 1}" for i in range(n)]


def loadings_table(b: Benchmarks) -> Table:
    n = b.params.n
    t = Table("loadings", ["contract"] + _idx("eta", n))
    for name, c in b.contracts().items():
        t.add(name, *c.eta)
    return t


def cessions_table(b: Benchmarks) -> Table:
    n = b.params.n
    t = Table("reinsurance", ["contract"] + _idx("p", n))
    t.add("JPO", *b.pareto.p_star)
    t.add("BO1", *b.bo1.p_star)
    t.add("BO2", *b.bo2.p_star)
    return t


def allocations_table(b: Benchmarks) -> Table:
    n = b.params.n
    t = Table("allocations", ["contract", "row"] + _idx("a", n))
    for name, A in (
        ("JPO", b.pareto.A_star),
        ("A0", b.no_reinsurer.A),
        ("BO1", b.bo1.A_star),
        ("BO2", b.bo2.A_star),
    ):
        for i in range(n):
            t.add(name, i + 1, *A[i])
    return t


def premiums_table(b: Benchmarks) -> Table:
    n = b.params.n
    t = Table("premiums", ["contract"] + _idx("premium", n) + ["total"])
    for name, c in b.contracts().items():
        pi = evaluate(b.params, c).premiums
        t.add(name, *pi, float(pi.sum()))
    return t


def disutility_table(b: Benchmarks) -> Table:
    p = b.params
    n = p.n
    t = Table("disutilities", ["contract"] + _idx("rho", n) + ["rho_R"])
    t.add("status_quo", *p.status_quo_disutility(), 0.0)
    t.add("no_reinsurer", *evaluate(p, b.no_reinsurer).rho_members, None)
    for name, c in (("JPO", b.jpo1), ("BO1", b.bo1.contract), ("BO2", b.bo2.contract)):
        e = evaluate(p, c)
        t.add(name, *e.rho_members, e.rho_R)
    return t


def welfare_table(b: Benchmarks) -> Table:
    p = b.params
    n = p.n
    t = Table("welfare", ["contract"] + _idx("omega", n) + ["omega_R", "total"])
    w0 = welfare(p, b.no_reinsurer)
    t.add("no_reinsurer", *w0.omega_members, None, float(w0.omega_members.sum()))
    for name, c in b.contracts().items():
        w = welfare(p, c)
        t.add(name, *w.omega_members, w.omega_reinsurer, w.total)
    return t


def all_tables(b: Benchmarks) -> list[Table]:
    return [
        loadings_table(b),
        cessions_table(b),
        allocations_table(b),
        premiums_table(b),
        disutility_table(b),
        welfare_table(b),
    ]


def benchmark_conditions(b: Benchmarks) -> ConditionReport:
    """Direct checks on every emitted contract plus the stability of the Pareto ones."""
    report = ConditionReport()
    p = b.params
    for name, c in list(b.contracts().items()) + [("no_reinsurer", b.no_reinsurer)]:
        f = check_feasibility(p, c)
        report.add(ConditionEntry(f"feasibility[{name}]", PASS if f.ok else FAIL, f.margin, advisory=False))
        alloc = welfare(p, c).allocation()
        if name == "no_reinsurer":
            alloc = alloc[:-1]
        report.add(ConditionEntry.from_slacks(f"ir[{name}]", alloc, strict=False, advisory=False))
    for name in ("JPO1", "JPO2"):
        st = game.check_stability(p, b.game, b.contracts()[name], b.pareto)
        omega = welfare(p, b.contracts()[name]).omega_members
        alloc = np.append(omega, b.game.grand_value - omega.sum())
        margin = float(np.min(b.game.core_slacks(alloc)))
        notes = [] if st.stable else [
            "blocked by " + game.coalition_label(st.blocking, p.n) if st.blocking is not None else "not efficient"
        ]
        report.add(ConditionEntry(f"core[{name}]", PASS if st.stable else FAIL, margin, advisory=False, notes=notes))
    return report


def validation_report(params: MarketParams, jpo2_t: float | None = None) -> ConditionReport:
    """Every named sufficient condition plus the direct checks they stand in for."""
    b = benchmarks(params, jpo2_t)
    report = ConditionReport()
    report.add(pareto.check_unicond2(params))
    report.add(pareto.check_wgcond(params))
    report.add(game.check_core_bound(params, b.pareto, b.game))
    report.add(ConditionEntry.from_slacks(
        "p_pareto_interior", np.minimum(b.pareto.p_star, 1 - b.pareto.p_star), strict=True, advisory=False
    ))
    for e in b.bo1.condition_report:
        report.add(_renamed(e, "BO1"))
    for e in b.bo2.condition_report:
        report.add(_renamed(e, "BO2"))
    report.extend(bowley.loading_window_bounds(params))
    sl = _renamed(b.jpo2_set.entry, "JPO2")
    sl.notes.append(f"loading used: {b.jpo2_t!r}; in feasible set: {b.jpo2_set.contains(b.jpo2_t)}")
    report.add(sl)
    for e in benchmark_conditions(b):
        if e.name not in report:
            report.add(e)
    return report


def _renamed(e: ConditionEntry, tag: str) -> ConditionEntry:
    return ConditionEntry(f"{e.name}[{tag}]", e.status, e.margin, e.slacks, e.advisory, list(e.notes), dict(e.details))


def sweep_table(params: MarketParams, gammas) -> Table:
    """Cessions and total welfare of JPO, BO1 and BO2 across reinsurer risk aversions."""
    n = params.n
    cols = ["gamma_r"]
    for name in ("jpo", "bo1", "bo2"):
        cols += [f"{name}_p_{i + 1}" for i in range(n)]
    cols += ["jpo_total", "bo1_total", "bo2_total"]
    t = Table("sweep", cols)
    for gR in sorted(float(g) for g in gammas):
        q = params.with_gamma_R(gR)
        sol = pareto.solve_rs(q)
        b1 = bowley.leader(q)
        b2 = bowley.leader_single(q)
        t.add(
            gR,
            *sol.p_star,
            *b1.p_star,
            *b2.p_star,
            total_welfare(q, sol.A_star, sol.p_star),
            total_welfare(q, b1.A_star, b1.p_star),
            total_welfare(q, b2.A_star, b2.p_star),
        )
    return t
