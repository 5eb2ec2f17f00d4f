import numpy as np
import pytest

from permgamp import bundled_scenario_path, load_scenario, trace_scenario


@pytest.fixture(scope="session")
def canyon():
    return load_scenario(bundled_scenario_path("canyon"))


@pytest.fixture(scope="session")
def canyon_rays(canyon):
    return trace_scenario(canyon)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(20240817))
