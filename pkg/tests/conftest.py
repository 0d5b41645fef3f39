import numpy as np
import pytest

from maxmix.simulate import FieldSample
from maxmix.spatial import SiteSet


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def line_sites():
    return SiteSet(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]]))


def frechet(u):
    return -1.0 / np.log(u)


def field_from(values, margins="unit-frechet", sites=None):
    values = np.asarray(values, dtype=float)
    if sites is None:
        k = values.shape[1]
        sites = SiteSet(np.column_stack([np.arange(k, dtype=float), np.zeros(k)]))
    return FieldSample(values, margins, sites)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
