import os

import numpy as np
import pytest

import driftlab as dl

# worker pool size for Monte Carlo fixtures; override to 1 for serial debugging
WORKERS = int(os.environ.get("DRIFTLAB_TEST_WORKERS", os.cpu_count() or 1))


@pytest.fixture(scope="session")
def bm():
    return dl.zero_drift().validate()


@pytest.fixture(scope="session")
def ou():
    return dl.linear_drift(-1.0, model_id="ou").validate()


@pytest.fixture(scope="session")
def bump():
    return dl.compact_bump(1.0).validate()


def constant_path(model, value, t_max, dt, checkpoints):
    """A Path frozen at one state, with zero driving noise."""
    cfg = dl.PathConfig(value, t_max, dt, checkpoints, seed=0)
    n = cfg.n_steps
    return dl.Path(dt=dt, x=np.full(n + 1, float(value)), dw=np.zeros(n), model=model, config=cfg)


def ramp_path(model, slope, t_max, dt, checkpoints):
    """Deterministic finite-variation path x(t) = slope * t."""
    cfg = dl.PathConfig(0.0, t_max, dt, checkpoints, seed=0)
    n = cfg.n_steps
    x = slope * dt * np.arange(n + 1)
    return dl.Path(dt=dt, x=x, dw=np.zeros(n), model=model, config=cfg)
