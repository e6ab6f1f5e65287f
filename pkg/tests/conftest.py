import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hsystem import GridSpec, build_grid

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
)
settings.load_profile("default")

R0 = 0.5
C1 = (R0**2 - 1) / (4 * np.log(R0))


def phi_exact(r, r0=R0):
    c1 = (r0**2 - 1) / (4 * np.log(r0))
    return (1 - r**2) / 4 + c1 * np.log(r)


def dphi_exact(r, r0=R0):
    c1 = (r0**2 - 1) / (4 * np.log(r0))
    return -r / 2 + c1 / r


def p_exact(r0=R0):
    """int |phi'|^2 2 pi r dr for the radial solution of -lap phi = 1 (hand integration)."""
    c1 = (r0**2 - 1) / (4 * np.log(r0))
    return 2 * np.pi * ((1 - r0**4) / 16 - c1 * (1 - r0**2) / 2 + c1**2 * (-np.log(r0)))


def e_xy_exact(r0=R0):
    return 2 * np.pi * (1 - r0**2) / (2 * np.sqrt(p_exact(r0)))


@pytest.fixture(scope="session")
def grid_small():
    return build_grid(GridSpec(R0, 16, 60))


@pytest.fixture(scope="session")
def grid_mid():
    return build_grid(GridSpec(R0, 32, 120))


# pass/fail lines of the acceptance suite, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
