"""Command-line entry point: p2p-contracts <command> --config <path|->."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from decimal import Decimal, InvalidOperation

import numpy as np

from . import bowley, game, pareto, tables
from .conditions import FAIL, PASS, ConditionEntry, ConditionReport
from .config import ParseError, load_config
from .market import ValidationError, check_feasibility, welfare
from .output import FORMATS, RunOutput, Table, emit

log = logging.getLogger("p2pcontracts")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONDITION = 2


def _configure_logging() -> None:
    level = os.environ.get("P2P_LOG", "").lower()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("p2pcontracts")
    root.handlers[:] = [handler]
    root.setLevel({"debug": logging.DEBUG, "info": logging.INFO}.get(level, logging.WARNING))


def parse_allocation(text: str) -> tuple[np.ndarray, float]:
    """Comma-separated gains, and half a unit in the last printed digit of each, summed."""
    values, slack = [], Decimal(0)
    for part in text.split(","):
        part = part.strip()
        try:
            d = Decimal(part)
        except InvalidOperation as exc:
            raise ParseError(f"not a number in allocation: {part!r}") from exc
        if not d.is_finite():
            raise ParseError(f"not a finite number in allocation: {part!r}")
        values.append(float(d))
        slack += Decimal(5) * Decimal(10) ** (d.as_tuple().exponent - 1)
    return np.array(values), float(slack)


def _matrix_table(name: str, A: np.ndarray) -> Table:
    n = A.shape[1]
    t = Table(name, ["row"] + [f"a_{j + 1}" for j in range(n)])
    for i, r in enumerate(A):
        t.add(i + 1, *r)
    return t


def _feasibility_entry(params, contract, name: str) -> ConditionEntry:
    f = check_feasibility(params, contract)
    return ConditionEntry(name, PASS if f.ok else FAIL, f.margin, advisory=False)


def cmd_pareto(cfg, args) -> RunOutput:
    p = cfg.params
    sol = pareto.solve_rs(p)
    out = RunOutput()
    t = Table("pareto", ["member", "p", "eta_min"])
    for i, (pi, em) in enumerate(zip(sol.p_star, pareto.eta_min(p, np.maximum(sol.p_star, 0)))):
        t.add(i + 1, pi, em)
    out.tables += [t, _matrix_table("allocation", sol.A_star)]
    out.conditions.add(pareto.check_unicond2(p))
    out.conditions.add(pareto.check_wgcond(p))
    out.conditions.add(_feasibility_entry(p, sol.contract(0.0), "feasibility"))
    return out


def cmd_bowley(cfg, args) -> RunOutput:
    p = cfg.params
    sol = bowley.leader_single(p) if args.single_loading else bowley.leader(p)
    w = welfare(p, sol.contract)
    out = RunOutput()
    t = Table("bowley", ["member", "eta", "p", "omega"])
    for i in range(p.n):
        t.add(i + 1, sol.eta_star[i], sol.p_star[i], w.omega_members[i])
    s = Table("reinsurer", ["omega_R", "omega_R_closed", "total"])
    s.add(w.omega_reinsurer, sol.omega_R_closed, w.total)
    out.tables += [t, _matrix_table("allocation", sol.A_star), s]
    out.conditions.extend(sol.condition_report)
    if not args.single_loading:
        out.conditions.extend(bowley.loading_window_bounds(p))
    return out


def cmd_game(cfg, args) -> RunOutput:
    p = cfg.params
    g = game.build_game(p)
    out = RunOutput()
    t = Table("coalitions", ["mask", "coalition", "value"])
    for mask in sorted(g.values):
        t.add(mask, game.coalition_label(mask, p.n), g.values[mask])
    c = game.find_core_element(g)
    core = Table("core_element", [f"c_{i + 1}" for i in range(p.n)] + ["c_R"])
    core.add(*c)
    out.tables += [t, core]
    for note in g.notes:
        log.info(note)
    return out


def cmd_core_check(cfg, args) -> RunOutput:
    p = cfg.params
    alloc, atol = parse_allocation(args.allocation)
    if alloc.shape != (p.n + 1,):
        raise ParseError(f"allocation needs {p.n + 1} entries (members then reinsurer), got {alloc.size}")
    g = game.build_game(p)
    res = game.check_core(g, alloc, atol=atol)
    out = RunOutput()
    t = Table("core_check", ["in_core", "efficiency_gap", "rounding_allowance", "grand_value"])
    t.add(res.in_core, res.efficiency_gap, atol, g.grand_value)
    v = Table("violations", ["coalition", "slack"])
    for mask, slack in res.violated:
        v.add(game.coalition_label(mask, p.n), slack)
    out.tables += [t, v]
    margin = float(np.min(g.core_slacks(alloc)))
    if abs(res.efficiency_gap) > max(game.EFFICIENCY_RTOL * abs(g.grand_value), atol):
        margin = min(margin, -abs(res.efficiency_gap))
    out.conditions.add(
        ConditionEntry("core_membership", PASS if res.in_core else FAIL, margin, advisory=False)
    )
    return out


def cmd_tables(cfg, args) -> RunOutput:
    b = tables.benchmarks(cfg.params, args.jpo2_t if args.jpo2_t is not None else cfg.jpo2_t)
    return RunOutput(tables.all_tables(b), tables.benchmark_conditions(b))


def cmd_sweep(cfg, args) -> RunOutput:
    return RunOutput([tables.sweep_table(cfg.params, cfg.sweep.grid())], ConditionReport())


def cmd_validate(cfg, args) -> RunOutput:
    t = args.jpo2_t if args.jpo2_t is not None else cfg.jpo2_t
    return RunOutput([], tables.validation_report(cfg.params, t))


COMMANDS = {
    "pareto": cmd_pareto,
    "bowley": cmd_bowley,
    "game": cmd_game,
    "core-check": cmd_core_check,
    "tables": cmd_tables,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="market JSON file, or - for stdin")
    common.add_argument("--format", choices=FORMATS, default="csv")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--jpo2-t", type=float, dest="jpo2_t", help="common loading for JPO2")
    common.add_argument("--single-loading", action="store_true", help="bowley: one loading for all")
    parser = argparse.ArgumentParser(
        prog="p2p-contracts",
        description="Pareto and leader-follower contracts for a peer-to-peer pool with reinsurance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "core-check":
            sp.add_argument("allocation", help="comma-separated gains: members then reinsurer")
    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        output = COMMANDS[args.command](cfg, args)
        data = emit(output, args.format)
    except (ParseError, ValidationError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    failures = output.conditions.required_failures
    for e in failures:
        log.warning("condition failed: %s (margin %.6g)", e.name, e.margin)
    return EXIT_CONDITION if failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
