"""
Pytest fixtures for the forward-backward parabolic solver test suite.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from analysis.setup import ExperimentSetup
from fem.mesh import build_uniform_mesh
from nonlinearity.registry import get_nonlinearity
from stepper.forcing import Forcing
from stepper.scheme import CouplingMatrix, SchemeConfig


def sine_initial(xs):
    return np.sin(np.pi * np.asarray(xs))[:, None]


def becu_initial(xs):
    xs = np.asarray(xs)
    return np.stack([np.sin(np.pi * xs), 0.5 * np.sin(2 * np.pi * xs), 0.2 * np.sin(3 * np.pi * xs)], axis=1)


@pytest.fixture
def unit_mesh():
    """Uniform mesh with K = 4 on (0, 1)."""
    return build_uniform_mesh(4)


@pytest.fixture
def heat():
    """Linear heat equation K = 1 with u0 = sin(pi x)."""
    return get_nonlinearity("power_law", m=1)


@pytest.fixture
def becu():
    return get_nonlinearity("becu", m=3)


@pytest.fixture
def heat_setup(heat):
    """Cheap heat experiment: K = 16, N = 10, T = 0.02."""
    return ExperimentSetup(
        nonlinearity=heat, coupling=CouplingMatrix.zero(1), forcing=Forcing.zero(1),
        initial=sine_initial, K=16, N=10, T=0.02, seed=3,
    )


@pytest.fixture
def becu_setup(becu):
    """Boundary-layer data: skew B, geostrophic forcing (-1, 1, 0), h = 1/16, dt = 1e-3."""
    return ExperimentSetup(
        nonlinearity=becu, coupling=CouplingMatrix.becu_skew(), forcing=Forcing.constant([-1.0, 1.0, 0.0]),
        initial=becu_initial, K=16, N=5, T=0.005, seed=5,
    )


@pytest.fixture
def heat_scheme():
    return SchemeConfig(dt=2e-3, N=10)


HEAT_CONFIG = """\
problem:
  nonlinearity: power_law
  components: 1
  T: 0.01
  initial: {expr: ["sin(pi*x)"]}
  exact: {expr: ["exp(-pi**2*t)*sin(pi*x)"]}
discretization:
  K: 16
  N: 10
ensemble:
  M: 3
  epsilon: 0.05
  seed: 21
"""


@pytest.fixture
def heat_config(tmp_path):
    """Small heat run configuration written to disk."""
    path = tmp_path / "heat_small.yaml"
    path.write_text(HEAT_CONFIG, encoding="utf-8")
    return path
