from __future__ import annotations

import numpy as np
import pytest

from p2pcontracts.market import baseline, random_market


@pytest.fixture
def params():
    return baseline()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_markets(seed: int, count: int, sizes=(2, 3, 4), gamma_R_max: float = 0.05):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.choice(sizes))
        out.append(random_market(rng, n, gamma_R=float(rng.uniform(0.0, gamma_R_max))))
    return out


ACCEPTANCE_LINES: list[str] = []


class Criterion:
    """Collects cell mismatches for one acceptance criterion, then prints one verdict line."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.misses: list[str] = []

    def close(self, label: str, got, want, atol: float) -> None:
        got, want = np.broadcast_arrays(np.asarray(got, dtype=float), np.asarray(want, dtype=float))
        bad = ~(np.abs(got - want) <= atol)
        for idx in zip(*np.nonzero(np.atleast_1d(bad))):
            at = idx if got.ndim else ()
            where = "[" + ",".join(str(int(i)) for i in at) + "]" if at else ""
            self.misses.append(f"{label}{where}: got {float(got[at])!r}, want {float(want[at])!r} (tol {atol:g})")

    def check(self, label: str, ok: bool) -> None:
        if not ok:
            self.misses.append(label)

    def finish(self) -> None:
        verdict = "PASS" if not self.misses else "FAIL"
        line = f"criterion {self.number:2d} {verdict}: {self.title}"
        if self.misses:
            line += f" ({len(self.misses)} mismatch: {self.misses[0]})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert not self.misses, "\n".join(self.misses)


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
