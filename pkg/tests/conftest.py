import numpy as np
import pytest

from slungsim import Gains, Params


@pytest.fixture
def params() -> Params:
    return Params()


@pytest.fixture
def gains() -> Gains:
    return Gains()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260809)
