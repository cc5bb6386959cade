import numpy as np
import pytest

from groupmte.pipeline import PipelineConfig, fit_parametric_pipeline
from groupmte.simulation import DgpConfig, simulate_dataset


@pytest.fixture(scope="session")
def small_data():
    """A small spillover dataset shared across fast tests."""
    return simulate_dataset(DgpConfig(G=800, seed=11))


@pytest.fixture(scope="session")
def small_fit(small_data):
    return fit_parametric_pipeline(small_data)


@pytest.fixture(scope="session")
def big_data():
    """A large spillover dataset for precision-sensitive checks."""
    return simulate_dataset(DgpConfig(G=10000, seed=8))


@pytest.fixture(scope="session")
def big_fit(big_data):
    return fit_parametric_pipeline(big_data, PipelineConfig(pool_units=True))


@pytest.fixture(scope="session")
def big_propensities(big_fit):
    return np.asarray(big_fit.propensities)
