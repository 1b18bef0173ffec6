import numpy as np
import pytest

from vfmlab.choke import FluidSpec


@pytest.fixture
def fluid():
    return FluidSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
