"""JSON market configuration."""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .market import MarketParams, ValidationError

SCHEMA_VERSION = "1"
SWEEP_PARAMS = ("gamma_r",)
DEFAULT_SWEEP = {"param": "gamma_r", "from": 0.0, "to": 0.029, "steps": 30}


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    param: str
    start: float
    stop: float
    steps: int

    def grid(self) -> np.ndarray:
        """Evenly spaced points, endpoints included, rounded to kill linspace noise."""
        pts = np.linspace(self.start, self.stop, self.steps)
        return np.round(pts, 12)


@dataclass(frozen=True)
class MarketConfig:
    params: MarketParams
    jpo2_t: float | None
    sweep: SweepSpec
    schema_version: str


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise ValidationError(path, "must be finite")
    return float(value)


def _vector(value: Any, path: str) -> list[float]:
    if not isinstance(value, list):
        raise ValidationError(path, "expected a list of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _matrix(value: Any, path: str) -> list[list[float]]:
    if not isinstance(value, list) or not value:
        raise ValidationError(path, "expected a non-empty list of rows")
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(value)]
    for i, r in enumerate(rows):
        if len(r) != len(rows):
            raise ValidationError(f"{path}[{i}]", f"row length {len(r)} != {len(rows)} (not square)")
    return rows


def _sweep(raw: Any) -> SweepSpec:
    if raw is None:
        raw = DEFAULT_SWEEP
    if not isinstance(raw, dict):
        raise ValidationError("sweep", "expected an object")
    param = raw.get("param", "gamma_r")
    if param not in SWEEP_PARAMS:
        raise ValidationError("sweep.param", f"unsupported sweep parameter {param!r}")
    for key in ("from", "to", "steps"):
        if key not in raw:
            raise ValidationError(f"sweep.{key}", "missing")
    steps = raw["steps"]
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
        raise ValidationError("sweep.steps", "expected a positive integer")
    start = _number(raw["from"], "sweep.from")
    stop = _number(raw["to"], "sweep.to")
    if start < 0 or stop < start:
        raise ValidationError("sweep", "need 0 <= from <= to")
    return SweepSpec(param, start, stop, steps)


def parse_config(data: Any) -> MarketConfig:
    if not isinstance(data, dict):
        raise ValidationError("", "top level must be a JSON object")
    for key in ("mu", "sigma", "gamma", "gamma_r"):
        if key not in data:
            raise ValidationError(key, "missing")
    mu = _vector(data["mu"], "mu")
    sigma = _matrix(data["sigma"], "sigma")
    gamma = _vector(data["gamma"], "gamma")
    gamma_r = _number(data["gamma_r"], "gamma_r")
    if len(gamma) != len(mu):
        raise ValidationError("gamma", f"length mismatch: {len(gamma)} != len(mu) = {len(mu)}")
    if len(sigma) != len(mu):
        raise ValidationError("sigma", f"length mismatch: {len(sigma)} != len(mu) = {len(mu)}")
    params = MarketParams(np.array(mu), np.array(sigma), np.array(gamma), gamma_r)
    jpo2_t = data.get("jpo2_t")
    if jpo2_t is not None:
        jpo2_t = _number(jpo2_t, "jpo2_t")
        if jpo2_t < 0:
            raise ValidationError("jpo2_t", "must be nonnegative")
    version = str(data.get("schema_version", SCHEMA_VERSION))
    return MarketConfig(params, jpo2_t, _sweep(data.get("sweep")), version)


def load_config(source: str | Path) -> MarketConfig:
    """Read a config from a path, or from standard input when ``source`` is "-"."""
    try:
        text = sys.stdin.read() if str(source) == "-" else Path(source).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {source}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(data)


def config_dict(params: MarketParams, jpo2_t: float | None = None) -> dict[str, Any]:
    out: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "mu": params.mu.tolist(),
        "sigma": params.Sigma.tolist(),
        "gamma": params.gamma.tolist(),
        "gamma_r": params.gamma_R,
    }
    if jpo2_t is not None:
        out["jpo2_t"] = jpo2_t
    return out
