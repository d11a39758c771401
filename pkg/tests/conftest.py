import numpy as np
import pytest

from regionwalk import hng, synth


@pytest.fixture(scope="session")
def corridor():
    return synth.corridor_dataset(60, 60, seed=3)


@pytest.fixture(scope="session")
def corridor_network(corridor):
    return hng.regionalize(corridor, r=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fitted(corridor):
    from regionwalk import experiment
    return experiment.fit(corridor, experiment.RunConfig(seed=3))
