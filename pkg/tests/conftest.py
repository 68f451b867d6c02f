from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pytest

from epiwave.data import EpidemicSeries

# acceptance criteria append (number, passed, detail) here; printed at session end
ACCEPTANCE_LINES: list[tuple[str, str, str]] = []


def make_series(infected, removed, population=1e6, start=date(2020, 3, 1), new_positives=None):
    infected = np.asarray(infected, dtype=float)
    removed = np.asarray(removed, dtype=float)
    if new_positives is None:
        new_positives = np.zeros_like(infected)
    dates = tuple(start + timedelta(days=k) for k in range(len(infected)))
    return EpidemicSeries(dates, infected, removed, np.asarray(new_positives, float), population)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(ACCEPTANCE_LINES, key=lambda t: int(t[0])):
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
