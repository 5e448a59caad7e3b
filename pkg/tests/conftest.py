import math

import numpy as np
import pytest

from csdetect import sequences
from csdetect.sets import Interval

ACCEPTANCE_LINES = []

FORCED = [(0.0, 1.0), (-1.0, 3.0), (-1.0, 3.0), (-1.0, 3.0), (2.0, 3.0)] + [(2.0, 3.0)] * 50


class _ScriptedState:
    def __init__(self):
        self.n = 0

    def update(self, x):
        self.n += 1
        return Interval(*FORCED[self.n - 1])


class ScriptedCS:
    """Ignores the data; emits a fixed sequence of intervals."""

    name = "scripted"
    kind = "interval"
    theta_range = (-math.inf, math.inf)

    def __init__(self, alpha):
        self.alpha = alpha

    def new_state(self):
        return _ScriptedState()

    def path(self, xs):
        n = len(xs)
        lo = np.array([FORCED[i][0] for i in range(n)])
        hi = np.array([FORCED[i][1] for i in range(n)])
        return lo, hi


@pytest.fixture
def scripted_family(monkeypatch):
    monkeypatch.setitem(sequences.FAMILIES, "scripted", ScriptedCS)
    return "scripted"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
