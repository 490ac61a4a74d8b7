import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from plaplace.grid import SpaceTimeGrid

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit_grid():
    # h = 0.1, dt = 0.1 on [0,1] x [0,1]
    return SpaceTimeGrid(1, 10, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# PASS/FAIL lines recorded by the acceptance suite, repeated after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
