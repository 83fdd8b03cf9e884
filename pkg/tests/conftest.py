import numpy as np
import pytest

from bayes_garma import CountSeries, Family, ModelSpec, ParamVector
from bayes_garma.inference import McmcConfig, PosteriorSample
from bayes_garma.simulate import SimConfig, simulate_series


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def point_sample(values, q: int = 1) -> PosteriorSample:
    """A posterior sample whose draws all sit at one parameter vector."""
    values = np.atleast_1d(np.asarray(values, dtype=float))
    draws = np.tile(values, (q, 1))
    return PosteriorSample(draws=draws, accept_count=0, proposals=q, map_estimate=values,
                           proposal_cov=np.eye(values.size))


def draws_sample(draws) -> PosteriorSample:
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    return PosteriorSample(draws=draws, accept_count=0, proposals=draws.shape[0],
                           map_estimate=draws.mean(axis=0), proposal_cov=np.eye(draws.shape[1]))


@pytest.fixture(scope="session")
def nb11_spec():
    return ModelSpec(Family.negative_binomial(15.0), 1, 1)


@pytest.fixture(scope="session")
def nb11_truth():
    return ParamVector([0.8], [0.5], [0.3])


@pytest.fixture(scope="session")
def nb11_series(nb11_spec, nb11_truth):
    return simulate_series(SimConfig(nb11_spec, nb11_truth, n=200, seed=11))


@pytest.fixture(scope="session")
def small_mcmc():
    return McmcConfig(iterations=1500, burn_in=200, thin=3, seed=5)


@pytest.fixture
def poisson_series():
    return CountSeries.build(np.array([1, 3, 0, 2, 4, 1, 2, 5, 0, 3]))
