from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from warpflow.flow import FlowConfig, evolve

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_numpy():
    # origin nodes divide by psi = 0 by design; values there are masked
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with np.errstate(divide="ignore", invalid="ignore"):
            yield


@pytest.fixture(scope="session")
def hyper_traj():
    return evolve(FlowConfig(preset="hyperbolic", M=128, t_end=0.5, record_every=50))


@pytest.fixture(scope="session")
def flat_traj():
    return evolve(FlowConfig(preset="flat", M=64, t_end=1.0, record_every=1,
                             outer_bc="extrapolate_zero_curvature_gradient"))


@pytest.fixture(scope="session")
def perturbed_traj():
    return evolve(FlowConfig(preset="perturbed_hyperbolic(0.1,2,0.5)", M=128, t_end=0.3,
                             record_every=20))
