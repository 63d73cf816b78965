"""Pass/fail records for the feasibility and sufficiency conditions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass
class ConditionEntry:
    """One named condition.

    ``advisory`` marks sufficient-only conditions: failing one says nothing
    definite about the property it guards. Direct checks (feasibility, IR,
    core membership) are non-advisory.
    """

    name: str
    status: str
    margin: float
    slacks: np.ndarray | None = None
    advisory: bool = True
    notes: list[str] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    @classmethod
    def from_slacks(
        cls, name: str, slacks, *, strict: bool, advisory: bool = True, **kwargs
    ) -> "ConditionEntry":
        s = np.atleast_1d(np.asarray(slacks, dtype=float))
        margin = float(np.min(s)) if s.size else float("inf")
        ok = margin > 0 if strict else margin >= 0
        return cls(name, PASS if ok else FAIL, margin, s, advisory, **kwargs)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "status": self.status,
            "advisory": self.advisory,
            "margin": self.margin,
        }
        if self.slacks is not None:
            out["slacks"] = [float(x) for x in self.slacks]
        if self.details:
            out["details"] = {k: _plain(v) for k, v in self.details.items()}
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass
class ConditionReport:
    entries: list[ConditionEntry] = field(default_factory=list)

    def add(self, entry: ConditionEntry) -> ConditionEntry:
        self.entries.append(entry)
        return entry

    def extend(self, other: "ConditionReport | list[ConditionEntry]") -> None:
        items = other.entries if isinstance(other, ConditionReport) else other
        self.entries.extend(items)

    def __iter__(self) -> Iterator[ConditionEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, name: str) -> ConditionEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(e.name == name for e in self.entries)

    @property
    def required_failures(self) -> list[ConditionEntry]:
        return [e for e in self.entries if not e.advisory and e.status == FAIL]

    def to_rows(self) -> list[dict[str, Any]]:
        return [
            {
                "condition": e.name,
                "status": e.status,
                "advisory": e.advisory,
                "margin": e.margin,
                "notes": "; ".join(e.notes),
            }
            for e in self.entries
        ]

    def to_list(self) -> list[dict[str, Any]]:
        return [e.to_dict() for e in self.entries]
