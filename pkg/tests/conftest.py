import os

import numpy as np
import pytest

from ibart.core import Dataset


def pytest_configure(config):
    os.environ.setdefault("SOURCE_DATE_EPOCH", "1700000000")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_data():
    r = np.random.default_rng(7)
    X = r.random((40, 3))
    y = np.sin(3 * X[:, 0]) + X[:, 1] + 0.1 * r.standard_normal(40)
    return Dataset.from_raw(X, y)


_CRITERIA = []


@pytest.fixture
def criterion(request):
    """Record a one-line acceptance verdict: ``criterion(number, passed, detail)``."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
