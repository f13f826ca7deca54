import numpy as np
import pytest

from pqcartan.forms import Form
from pqcartan.numerics import ScaledMatrix


@pytest.fixture
def s1():
    """Reference setup: d=3 real, J=diag(1,1,-1)."""
    return Form.standard(2, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_sl(rng, d, spread=1.0):
    """A well-conditioned random matrix, determinant-normalized in scaled form."""
    a = rng.standard_normal((d, d)) + spread * np.eye(d)
    while abs(np.linalg.det(a)) < 1e-3:
        a = rng.standard_normal((d, d)) + spread * np.eye(d)
    a = a / abs(np.linalg.det(a)) ** (1.0 / d)
    return ScaledMatrix.of(a)
