"""Named tables and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .conditions import ConditionReport

FORMATS = ("csv", "json")


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"{self.name}: row has {len(values)} values, expected {len(self.columns)}")
        self.rows.append([_scalar(v) for v in values])

    def column(self, name: str) -> list[Any]:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def row(self, key: Any) -> list[Any]:
        """First row whose leading cell equals ``key``."""
        for r in self.rows:
            if r[0] == key:
                return r
        raise KeyError(key)

    def record(self, key: Any) -> dict[str, Any]:
        return dict(zip(self.columns, self.row(key)))


def _scalar(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass
class RunOutput:
    tables: list[Table] = field(default_factory=list)
    conditions: ConditionReport = field(default_factory=ConditionReport)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit(output: RunOutput, fmt: str) -> bytes:
    """Serialize deterministically. CSV holds one block per table, each headed by '# name'."""
    if fmt == "json":
        doc = {
            "tables": {t.name: {"columns": t.columns, "rows": t.rows} for t in output.tables},
            "conditions": output.conditions.to_list(),
        }
        return (json.dumps(doc, indent=2, allow_nan=True) + "\n").encode("utf-8")
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    tables = list(output.tables)
    if len(output.conditions):
        cond = Table("conditions", ["condition", "status", "advisory", "margin", "notes"])
        for r in output.conditions.to_rows():
            cond.add(*r.values())
        tables.append(cond)
    for i, t in enumerate(tables):
        if i:
            buf.write("\n")
        if len(tables) > 1:
            buf.write(f"# {t.name}\n")
        writer.writerow(t.columns)
        for r in t.rows:
            writer.writerow([_cell(v) for v in r])
    return buf.getvalue().encode("utf-8")
