import sys
import warnings

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def gaussian_instance(rng, n, p, k=None, sigma=1.0, scale=1.0):
    """Isotropic design with unit mean eigenvalue and a sparse signal."""
    X = rng.standard_normal((n, p)) / np.sqrt(n)
    beta = np.zeros(p)
    k = p // 10 if k is None else k
    beta[:k] = scale * rng.standard_normal(k) * 3
    y = X @ beta + sigma * rng.standard_normal(n)
    return X, y, beta


@pytest.fixture(autouse=True)
def _quiet_runtime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
