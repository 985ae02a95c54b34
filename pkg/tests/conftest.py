import numpy as np
import pytest

from poiseflow.grid import build_grid


@pytest.fixture(scope="session")
def grid96():
    return build_grid(10.0, 96)


@pytest.fixture(scope="session")
def grid128():
    return build_grid(10.0, 128)


@pytest.fixture(scope="session")
def grid256():
    return build_grid(10.0, 256)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
