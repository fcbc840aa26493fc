import numpy as np
import pytest

from agnoctl.bellman import SolverGrid


@pytest.fixture(scope="session")
def coarse_grid():
    """Small 4D grid: fast enough for unit tests, fine enough to be meaningful."""
    return SolverGrid.create(Q=5.0, Z1=8.0, Z2=8.0, T=1.0,
                             n_q=101, n_z1=21, n_z2=3, n_t=21)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260823)


# acceptance tests append "ACCEPTANCE n: PASS/FAIL ..." lines here; the hook
# echoes them after the run so they are visible even with output capture on
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
