import numpy as np
import pytest
import scipy.sparse as sp

from ssnsketch.data import Dataset
from ssnsketch.problem import LogisticModel


def random_dataset(n, d, seed=0, sparse=False, scale=1.0):
    rng = np.random.default_rng(seed)
    X = scale * rng.standard_normal((n, d))
    if sparse:
        X[rng.random((n, d)) < 0.8] = 0.0
        X = sp.csr_matrix(X)
    y = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    return Dataset(X, y, f"rand-{n}x{d}")


@pytest.fixture
def small_model():
    return LogisticModel(random_dataset(40, 8, seed=3))


@pytest.fixture(params=[False, True], ids=["dense", "csr"])
def model_both(request):
    return LogisticModel(random_dataset(60, 7, seed=11, sparse=request.param))
