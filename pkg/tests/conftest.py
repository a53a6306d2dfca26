import numpy as np
import pytest

from emla_sens.config import example_config_path, load_config
from emla_sens.kinematics import run_trajectory


@pytest.fixture(scope="session")
def shipped():
    return load_config(example_config_path())


@pytest.fixture(scope="session")
def spiral_run(shipped):
    """Shipped spiral (with its static hold) tracked at dt = 1e-3."""
    return run_trajectory(shipped.model, shipped.trajectory, 1e-3, shipped.initial_q)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
