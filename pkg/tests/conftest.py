import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from diacnn.datapipe.synthetic import make_splits


@pytest.fixture(scope="session", autouse=True)
def single_thread_blas():
    # the reference path is single-threaded; bitwise comparisons rely on it
    with threadpool_limits(1):
        yield


@pytest.fixture(scope="session")
def synthetic_splits():
    return make_splits(200, 50, 50, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
