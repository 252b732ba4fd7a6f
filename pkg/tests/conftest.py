"""
Shared pytest fixtures and configuration
"""

import logging
import os
import sys

import pytest

import numpy as np

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from qsing.inference.models import get_model
from qsing.inference.posterior import MhConfig
from qsing.quantum.quantum_core import random_density_matrix
from qsing.quantum.shadows import PauliShadowScheme
from qsing.utils.experiment import ExperimentConfig


@pytest.fixture(scope="session")
def test_data_dir():
    """Fixture for test data directory"""
    return os.path.join(os.path.dirname(__file__), 'data')


@pytest.fixture
def rng():
    """Seeded random stream, fresh per test"""
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def pauli_scheme():
    """Single-qubit 6-outcome Pauli shadow scheme"""
    return PauliShadowScheme.build(1)


@pytest.fixture
def random_states(rng):
    """Twenty random full-rank one-qubit states"""
    return [random_density_matrix(2, rng) for _ in range(20)]


@pytest.fixture
def maximally_mixed():
    return np.eye(2, dtype=complex) / 2


@pytest.fixture
def ex41_model():
    return get_model("ex41_regular")


@pytest.fixture
def ex42_model():
    return get_model("ex42_singular")


@pytest.fixture
def sec42_model():
    return get_model("sec42_regular")


@pytest.fixture
def small_mh_config():
    """Short chain for fast tests"""
    return MhConfig(n_samples=1500, burn_in=300, step_scale=0.1)


@pytest.fixture
def tiny_experiment_config(tmp_path):
    """Two sample sizes, two repetitions, short chains"""
    return ExperimentConfig(
        model_id="ex41_regular",
        master_seed=7,
        n_grid=[200, 400],
        repetitions=2,
        mh=MhConfig(n_samples=600, burn_in=100, step_scale=0.1),
        output_dir=str(tmp_path / "out"),
    )


@pytest.fixture
def restore_logging():
    """Undo setup_logging so handlers never outlive a captured stream"""
    root = logging.getLogger()
    handlers = root.handlers[:]
    levels = {name: logging.getLogger(name).level for name in ("", "qsing.inference.posterior", "qsing.utils.experiment")}
    yield
    for handler in root.handlers[:]:
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()
    for handler in handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    for name, level in levels.items():
        logging.getLogger(name).setLevel(level)


def pytest_configure(config):
    """Configure pytest markers"""
    config.addinivalue_line(
        "markers", "unit: marks fast deterministic unit tests"
    )
    config.addinivalue_line(
        "markers", "integration: marks tests that run the experiment pipeline or the CLI"
    )
    config.addinivalue_line(
        "markers", "slow: marks 100-repetition statistical acceptance runs"
    )
    config.addinivalue_line(
        "markers", "performance: marks runtime budget tests"
    )
