import numpy as np
import pytest

from gtimex.config import ProblemConfig
from gtimex.tableau import ButcherTableau, IMEXPair, builtin_scheme

SCHEMES = ("GSA342", "SSP2332")


def euler_pair() -> IMEXPair:
    """Forward/backward Euler: the smallest type A, stiffly accurate pair."""
    return IMEXPair(
        "EULER",
        ButcherTableau([["0"]], ["1"], ["0"], explicit=True),
        ButcherTableau([["1"]], ["1"], ["1"]),
    )


@pytest.fixture(params=SCHEMES)
def scheme(request):
    return builtin_scheme(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_config():
    return ProblemConfig(eps=0.5, n_steps=8, cells=10, t_final=0.4)


# One line per acceptance criterion, printed at the end of the session.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
