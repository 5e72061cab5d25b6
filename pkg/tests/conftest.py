import numpy as np
import pytest

from fracphi.potentials import catalog
from fracphi.spectral import solve
from fracphi.stable import StableParams


@pytest.fixture(scope="session")
def cauchy():
    return StableParams(1.0, 1)


@pytest.fixture(scope="session")
def oscillator_full():
    """alpha = 1, V = x^2 with a complete eigenbasis (dense solve)."""
    return solve(StableParams(1.0), catalog("power", delta=2), 20.0, 512, n_modes=512)


@pytest.fixture(scope="session")
def oscillator_1024():
    return solve(StableParams(1.0), catalog("power", delta=2), 20.0, 1024, n_modes=1024)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
