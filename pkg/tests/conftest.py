import numpy as np
import pytest
from hypothesis import strategies as st

from uqsim import qmath


@pytest.fixture
def phi_minus_rho():
    return qmath.outer_product(qmath.phi_minus())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


seeds = st.integers(min_value=0, max_value=2**32 - 1)
