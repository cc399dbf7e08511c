import numpy as np
import pytest
from hypothesis import settings

from netsemi.gridfn import Grid, NetworkState
from netsemi.netmodel import DiffusionCoupling, TransportCoupling, exchange_coupling

settings.register_profile("netsemi", deadline=None, max_examples=40)
settings.load_profile("netsemi")


def random_state(rng, grid, m, positive=False):
    v = rng.normal(size=(m, grid.nodes.size))
    return NetworkState(grid, np.abs(v) if positive else v)


def random_coupling(rng, m, scale=1.0, sigma=None):
    blocks = [scale * rng.normal(size=(m, m)) for _ in range(4)]
    sigma = rng.uniform(0.5, 2.0, m) if sigma is None else sigma
    return DiffusionCoupling(*blocks, sigma)


def positive_coupling(rng, m, scale=1.0, sigma=None):
    """Conservative coupling from random exchange rates: passes the sign criterion."""
    sigma = rng.uniform(0.5, 2.0, m) if sigma is None else sigma
    return exchange_coupling(scale * rng.uniform(0, 1, (2 * m, 2 * m)), sigma)


def violating_coupling(rng, m):
    """Random coupling with at least one sign violation (resampled until it has one)."""
    from netsemi.posit import check_diffusion_positivity
    while True:
        dc = random_coupling(rng, m)
        if not check_diffusion_positivity(dc).positive:
            return dc


def stochastic_k(rng, m):
    k = rng.uniform(0, 1, (m, m))
    return k / k.sum(axis=0)


def compatible_state(rng, grid, k):
    """Nonnegative PL data with u(0) = K u(1), so transport traces stay continuous."""
    m = k.shape[0]
    v = np.abs(rng.normal(size=(m, grid.nodes.size)))
    v[:, 0] = k @ v[:, -1]
    return NetworkState(grid, v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid():
    return Grid.uniform(200)


@pytest.fixture
def loop():
    return TransportCoupling([[1.0]], [1.0])
