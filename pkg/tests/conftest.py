import numpy as np
import pytest

from alphacir.model import ModelParams


@pytest.fixture
def unit():
    return ModelParams(0.5, 1.0, 1.0, 1.0)


@pytest.fixture
def unit2():
    """One type, a = b = 1, alpha = 0.5, m(E) = 2."""
    return ModelParams(0.5, 1.0, 1.0, 2.0)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
