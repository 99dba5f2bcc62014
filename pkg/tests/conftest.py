#!/usr/bin/env python3
"""
Shared test fixtures and configuration for the test suite.
"""

import copy
import os
import sys
from pathlib import Path
from typing import Any
from unittest.mock import Mock

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from auv_formation.dynamics import VehicleParams
from auv_formation.graph import build_topology
from auv_formation.rbf import build_grid_network

A0_REFERENCE = [
    [0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, -1, 0],
    [0, 0, 0, 0, 0, 1],
    [-1, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0],
    [0, 0, -1, 0, 0, 0],
]

# Hydrodynamic constants of the five reference vehicles
REFERENCE_FLEET = [
    dict(m=23.0, I_z=1.8, X_du=-2.0, Y_dv=-10.0, N_dr=-1.0, X_u=-0.8, Y_v=-0.9, Y_r=0.1,
         N_v=0.1, X_uu=-1.3, Y_vv=-36.0),
    dict(m=25.0, I_z=2.0, X_du=-2.5, Y_dv=-10.0, N_dr=-1.5, X_u=-1.0, Y_v=-1.0, Y_r=0.2,
         N_v=0.1, X_uu=-1.3, Y_vv=-25.0),
    dict(m=20.0, I_z=1.5, X_du=-1.5, Y_dv=-10.0, N_dr=-1.0, X_u=-1.0, Y_v=-0.8, Y_r=0.1,
         N_v=0.05, X_uu=-1.0, Y_vv=-20.0),
    dict(m=30.0, I_z=2.2, X_du=-2.5, Y_dv=-15.0, N_dr=-2.5, X_u=-1.5, Y_v=-1.5, Y_r=0.2,
         N_v=0.3, X_uu=-0.85, Y_vv=-15.0),
    dict(m=35.0, I_z=2.5, X_du=-3.0, Y_dv=-15.0, N_dr=-2.5, X_u=-2.0, Y_v=-1.5, Y_r=0.5,
         N_v=0.35, X_uu=-1.5, Y_vv=-20.0),
]


def _small_scenario(n_agents: int = 2) -> dict[str, Any]:
    weights = np.zeros((n_agents + 1, n_agents + 1))
    for i in range(1, n_agents + 1):
        weights[i, i - 1] = 1.0
    agents = [
        {
            "params": f"auv{k + 1}",
            "eta0": [0.5 + 0.2 * k, 1.5 - 0.1 * k, 0.0],
            "nu0": [0.0, 0.0, 0.0],
            "d_star": [0.2 * k, -0.2 * k, 0.0],
        }
        for k in range(n_agents)
    ]
    return {
        "format": 1,
        "name": "small",
        "vehicles": {
            f"auv{k + 1}": {**REFERENCE_FLEET[k % 5], "x_g": 0.05, "uncertainty_id": k % 5 + 1}
            for k in range(n_agents)
        },
        "topology": {"weights": weights.tolist()},
        "leader": {"A0": A0_REFERENCE, "chi0": [0, 2, 0, 2, 0, 2]},
        "agents": agents,
        "observer": {"beta1": 5.0, "beta2": 5.0},
        "controller": {
            "mode": "adaptive",
            "K1": [2.4, 2.0, 2.0],
            "K2": [6.0, 5.0, 5.0],
            "gamma": 2.0,
            "sigma": 0.001,
            "weights": None,
        },
        "nn": {
            "input": "nu",
            "bounds": [[-5, 5], [-5, 5], [-5, 5]],
            "counts": [3, 3, 3],
            "width": 3.0,
        },
        "sim": {
            "dt": 0.01,
            "t_end": 0.5,
            "decimation": 5,
            "weight_decimation": 1,
            "plants": True,
            "coriolis": "reference",
            "seed": 0,
        },
        "analysis": {"learn_window": [0.25, 0.5], "transient_factor": 2.0, "thresholds": {}},
    }


@pytest.fixture
def scenario_doc():
    """Factory for a short, cheap scenario document (deep copies)."""

    def factory(n_agents: int = 2, **sections: Any) -> dict[str, Any]:
        doc = copy.deepcopy(_small_scenario(n_agents))
        for name, value in sections.items():
            if isinstance(value, dict) and isinstance(doc.get(name), dict):
                doc[name].update(value)
            else:
                doc[name] = value
        return doc

    return factory


@pytest.fixture
def small_config(scenario_doc):
    """Validated ``SimConfig`` of the small two-agent scenario."""
    from auv_formation.scenario import build_config

    return build_config(scenario_doc())


@pytest.fixture
def single_follower_topology():
    """Leader -> follower 1."""
    return build_topology([[0.0, 0.0], [1.0, 0.0]])


@pytest.fixture
def fleet_params():
    """The five reference vehicles."""
    return [
        VehicleParams(**row, x_g=0.05, uncertainty_id=k + 1)
        for k, row in enumerate(REFERENCE_FLEET)
    ]


@pytest.fixture
def small_network():
    """3x3x3 lattice on [-1, 1]^3 with random weights."""
    net = build_grid_network([[-1.0, 1.0]] * 3, [3, 3, 3], 0.8)
    rng = np.random.default_rng(7)
    return net.with_weights(rng.standard_normal(net.weights.shape))


@pytest.fixture
def trace_factory():
    """Factory for an all-zero ``SimTrace`` that tests fill in."""
    from auv_formation.engine import SimTrace

    def factory(samples: int = 5, n_agents: int = 1, n_nodes: int = 8, dt: float = 0.1) -> SimTrace:
        s, n = samples, n_agents
        return SimTrace(
            t=np.arange(s) * dt,
            chi0=np.zeros((s, 6)),
            eta=np.zeros((s, n, 3)),
            nu=np.zeros((s, n, 3)),
            chi_hat=np.zeros((s, n, 6)),
            err_chi=np.zeros((s, n)),
            err_A=np.zeros((s, n)),
            z1=np.zeros((s, n, 3)),
            z2=np.zeros((s, n, 3)),
            tau=np.zeros((s, n, 3)),
            weight_norm=np.zeros((s, n, 3)),
            F=np.zeros((s, n, 3)),
            nn_out=np.zeros((s, n, 3)),
            weight_times=np.arange(s) * dt,
            weights=np.zeros((s, n, 3, n_nodes)),
        )

    return factory


@pytest.fixture
def temp_dir(tmp_path):
    """Create a temporary directory for testing."""
    return tmp_path


@pytest.fixture
def mock_config():
    """Create a mock configuration object."""
    config = Mock()
    config.log_file = None
    config.log_level = "INFO"
    config.log_level_value = 20
    config.log_rotation_count = 7
    config.progress_interval = 10
    config.metrics_enabled = False
    config.project_root = Path("/tmp")
    config.validate.return_value = True
    return config


@pytest.fixture
def mock_logger():
    """Create a mock logger object."""
    logger = Mock()
    logger.info = Mock()
    logger.debug = Mock()
    logger.warning = Mock()
    logger.error = Mock()
    logger.critical = Mock()
    logger.exception = Mock()
    return logger


@pytest.fixture
def test_environment():
    """Set up test environment variables."""
    original_env = os.environ.copy()

    test_env = {
        "AUVSIM_LOG_LEVEL": "DEBUG",
        "AUVSIM_PROGRESS_INTERVAL": "25",
        "AUVSIM_METRICS": "true",
    }
    os.environ.update(test_env)

    yield test_env

    os.environ.clear()
    os.environ.update(original_env)


# Pytest markers
def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line("markers", "integration: mark test as integration test")
    config.addinivalue_line("markers", "slow: mark test as slow running")
    config.addinivalue_line("markers", "unit: mark test as unit test")
