import numpy as np
import pytest

from finslerlab.catalog import builtin, names


@pytest.fixture(scope="session")
def catalog():
    return {n: builtin(n) for n in names()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
