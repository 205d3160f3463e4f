import numpy as np
import pytest

from viscogas.model import ApproxParams, derive_params
from viscogas.solver import Grid1D, SolverConfig, constant_data, riemann_data, run, sine_data

SHOCK_LEFT = (1.0, 0.0, 0.2)
SHOCK_RIGHT = (0.4, 0.0, -0.2)


@pytest.fixture(scope="session")
def gas14():
    return derive_params(1.4)


@pytest.fixture(scope="session")
def small_shock_tube(gas14):
    """Coarse shock tube: delta=0.05, eps=delta^2, dx=eps/2."""
    approx = ApproxParams.coupled(0.05)
    grid = Grid1D(-1.0, 1.0, 1600)
    cfg = SolverConfig(gas14, approx, grid, t_end=0.1, snapshot_every=10)
    return run(cfg, riemann_data(SHOCK_LEFT, SHOCK_RIGHT))


@pytest.fixture(scope="session")
def constant_run(gas14):
    approx = ApproxParams(0.01, 0.05)
    grid = Grid1D(-1.0, 1.0, 400)
    cfg = SolverConfig(gas14, approx, grid, t_end=0.05, snapshot_every=5)
    return run(cfg, constant_data(1.0, 0.3, 0.1))


@pytest.fixture(scope="session")
def smooth_periodic_run(gas14):
    approx = ApproxParams(0.01, 0.05)
    grid = Grid1D(0.0, 1.0, 200, "periodic")
    cfg = SolverConfig(gas14, approx, grid, t_end=0.05, snapshot_every=1)
    data = sine_data(rho=(1.0, 0.2), u=(0.1, 0.1), s=(0.1, 0.1), length=1.0)
    return run(cfg, data)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
