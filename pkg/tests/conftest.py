import pytest

from amlab import Grid3, PhysicalParams, scenario
from amlab.decompose import self_fields


@pytest.fixture(scope="session")
def grid64():
    return Grid3.cube(64, 8.0)


@pytest.fixture(scope="session")
def electron64(grid64):
    """gaussian-spin-up at e = -1 with its self-fields on 64^3."""
    params = PhysicalParams(e=-1.0)
    psi = scenario("gaussian-spin-up", grid64, params)
    return psi, self_fields(psi, params), params


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
