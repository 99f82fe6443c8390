import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tentlab.measures import Grid

settings.register_profile("lab", deadline=None, max_examples=30, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def grid1d():
    return Grid.regular(-10.0, 10.0, 2048)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    """Append ``(criterion, ok, detail)``; the lines are printed in the terminal summary."""
    return request.config.stash[_ACCEPTANCE]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash.get(_ACCEPTANCE, []), key=lambda t: t[0])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in lines:
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
