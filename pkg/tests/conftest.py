import numpy as np
import pytest

from ltvcert.cert import DecayRates
from ltvcert.model import PiecewiseLTVSystem, TimeGrid, UncertainPiecewiseLTVSystem


def make_system(breakpoints, A, B=None):
    base = PiecewiseLTVSystem(TimeGrid(tuple(breakpoints)), tuple(A))
    if B is None:
        return base
    return UncertainPiecewiseLTVSystem(base, tuple(B))


@pytest.fixture
def scalar_pw_stable():
    """N=1 scalar a = {-1, -2} on [0, 1]."""
    return make_system([0.0, 1.0], [[[-1.0]], [[-2.0]]]), DecayRates((0.1, 0.1))


@pytest.fixture
def scalar_uncertain():
    """Constant scalar a = -1, b = 0.5; true stability boundary delta = 2."""
    sys_obj = make_system([0.0, 1.0], [[[-1.0]], [[-1.0]]],
                          [[[0.5]], [[0.5]]])
    return sys_obj, DecayRates((0.01, 0.01))


@pytest.fixture
def planar_uncertain():
    rng = np.random.default_rng(3)
    A = [np.array([[-2.0, 1.0], [0.0, -1.0]]),
         np.array([[-1.0, 0.5], [-0.5, -2.0]])]
    B = [0.3 * np.eye(2), 0.2 * np.eye(2) + 0.05 * rng.standard_normal((2, 2))]
    return make_system([0.0, 2.0], A, B), DecayRates((0.01, 0.01))
