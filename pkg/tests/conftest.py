import math

import pytest

from obscost.semigroup import Grid, build_operator


@pytest.fixture(scope="session")
def op_55():
    return build_operator(Grid(5.5, 128))


@pytest.fixture(scope="session")
def two_pi():
    return 2 * math.pi


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """List collecting one PASS/FAIL line per acceptance criterion."""
    return request.config.stash.setdefault(ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
