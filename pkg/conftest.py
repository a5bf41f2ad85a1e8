import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end sweeps (deselect with -m 'not slow')")


@pytest.fixture
def rng():
    return np.random.default_rng(42)
