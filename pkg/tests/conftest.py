import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from lno.model import LnoConfig, build


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running test, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    # R = 3, 14 x 14 inputs give 8 x 8 outputs
    return LnoConfig(d=2, d_u=2, width=4, proj_hidden=8, n=1, N=4, M=2, k=2, H=1, dx=0.125, dt=0.05)


@pytest.fixture
def tiny_model(tiny_config):
    return build(tiny_config, seed=3)
