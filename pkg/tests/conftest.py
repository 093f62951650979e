"""Shared helpers for the test suite."""

import numpy as np

from sgrlab import EnvironmentChain, Leslie2Params, ModelSpec

# vital-rate intervals of the grid study; random-model tests draw from them
JUV_FERT_RANGE = (0.1, 3.0)
ADULT_FERT_RANGE = (0.1, 5.0)
SURVIVAL_RANGE = (0.1, 0.9)


def random_leslie2_iid(rng, r=2) -> ModelSpec:
    """Random two-age-class IID model with study-interval rates."""
    params = Leslie2Params(
        rng.uniform(*JUV_FERT_RANGE, r),
        rng.uniform(*ADULT_FERT_RANGE, r),
        rng.uniform(*SURVIVAL_RANGE, r),
    )
    pi = rng.uniform(0.1, 0.9, r)
    pi /= pi.sum()
    return ModelSpec(params.environment_set(), EnvironmentChain.iid(pi))


def leslie2_model(f, F, s, pi) -> ModelSpec:
    """Two-age-class IID model from explicit per-environment rates."""
    params = Leslie2Params(np.asarray(f, float), np.asarray(F, float), np.asarray(s, float))
    return ModelSpec(params.environment_set(), EnvironmentChain.iid(pi))


def leslie_rho(f, F, s) -> float:
    """Dominant eigenvalue of [[f, F], [s, 0]] -- independent closed form."""
    return (f + np.sqrt(f * f + 4.0 * F * s)) / 2.0
