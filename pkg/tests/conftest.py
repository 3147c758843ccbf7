from __future__ import annotations

import pytest

from peakcount.ground_state import ProblemParams, solve_ground_state
from peakcount.weight import MomentTable

_GS: dict = {}
_TABLES: dict = {}


def ground_state(p: float, dim: int):
    key = (float(p), int(dim))
    if key not in _GS:
        _GS[key] = solve_ground_state(ProblemParams(p, dim))
    return _GS[key]


def table(p: float, dim: int) -> MomentTable:
    key = (float(p), int(dim))
    if key not in _TABLES:
        _TABLES[key] = MomentTable(ground_state(p, dim))
    return _TABLES[key]


@pytest.fixture(scope="session")
def table_2_3():
    """Moments for p = 2 in R^3 (d = 2), the worked example's setting."""
    return table(2.0, 3)


@pytest.fixture(scope="session")
def table_3_2():
    """Moments for p = 3 in R^2 (d = 1)."""
    return table(3.0, 2)
