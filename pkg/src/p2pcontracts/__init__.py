"""Peer-to-peer insurance contracts with a reinsurer: Pareto and leader-follower designs."""

from .bowley import BowleySolution, follower, leader, leader_single
from .game import CoalitionGame, build_game, check_core, find_core_element
from .market import Contract, MarketParams, WelfareReport, baseline, evaluate, welfare
from .pareto import ParetoSolution, jpo_equal_split, loadings_from_welfare, solve_rs

__all__ = [
    "BowleySolution",
    "CoalitionGame",
    "Contract",
    "MarketParams",
    "ParetoSolution",
    "WelfareReport",
    "baseline",
    "build_game",
    "check_core",
    "evaluate",
    "find_core_element",
    "follower",
    "jpo_equal_split",
    "leader",
    "leader_single",
    "loadings_from_welfare",
    "solve_rs",
    "welfare",
]
