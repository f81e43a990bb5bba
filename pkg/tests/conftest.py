import math

import numpy as np
import pytest

from transonic.elliptic_fbp import SectorGrid
from transonic.radial import background_solution, standard_case

THETA = math.pi / 6


@pytest.fixture(scope="session")
def std():
    return standard_case()


@pytest.fixture(scope="session")
def sol(std):
    gas, noz, inflow = std
    return background_solution(gas, noz, inflow, 1.5)


@pytest.fixture(scope="session")
def grid(sol):
    return SectorGrid.for_solution(sol, 41, 21, THETA)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
