from __future__ import annotations

import logging

import numpy as np
import pytest

from agechemostat.equilibrium import solve_equilibrium
from agechemostat.model import tothkot_assumption_b, tothkot_model

# one line per acceptance criterion, emitted in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _quiet_projection(caplog):
    # initial profiles built from the exact survivor function are re-projected on the grid
    caplog.set_level(logging.ERROR, logger="agechemostat.simulator")


@pytest.fixture(scope="session")
def small_model():
    """Constant-mortality model with round closed forms: S* = 1, f*(0) = 1.5."""
    return tothkot_model(2.0, 0.5, 0.5, 1.0, 2.0, n_age=4001)


@pytest.fixture(scope="session")
def small_eq(small_model):
    return solve_equilibrium(small_model)


@pytest.fixture(scope="session")
def recipe_model():
    """(Y, k, L, D, S_in) = (2, 2, 1, 0.2, 2): above the global threshold 0.125."""
    return tothkot_model(2.0, 2.0, 1.0, 0.2, 2.0, n_age=2001)


@pytest.fixture(scope="session")
def recipe_eq(recipe_model):
    return solve_equilibrium(recipe_model)


@pytest.fixture(scope="session")
def recipe_data(recipe_model, recipe_eq):
    return tothkot_assumption_b(recipe_model, recipe_eq.theta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
