import numpy as np
import pytest

from hhokirchhoff.hho import HHOSpace
from hhokirchhoff.mesh import generate
from hhokirchhoff.problems import builtin_problems

# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def problems():
    return builtin_problems()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_spaces = {}


def space_for(family, n, k):
    key = (family, n, k)
    if key not in _spaces:
        _spaces[key] = HHOSpace(generate(family, n), k)
    return _spaces[key]
