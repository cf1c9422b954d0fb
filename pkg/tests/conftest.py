import numpy as np
import pytest

from sigpayoff.market import MarketCondition

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def canonical_mc():
    return MarketCondition(100.0, 0.05, 0.2, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_points(rng, n_points=6, x0=None):
    """Random augmented-style 3-d piecewise-linear path with increasing time."""
    times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.4, n_points - 1))])
    values = np.abs(rng.normal(1.0, 0.3, n_points)) + 0.1
    if x0 is not None:
        values[0] = x0
    third = values[0] * times / times[-1]
    return np.column_stack([times, values, third])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
