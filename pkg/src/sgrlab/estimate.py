"""Growth-rate estimation: Monte-Carlo SGR, mean growth rate, second-order
approximation, and exact small-instance oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .errors import NumericalError, UnsupportedModelError, ValidationError
from .models import ModelSpec
from .seeding import substream_array
from .spectral import (
    dominant_eigenvectors,
    spectral_radius,
    stationary_distribution,
    weighted_mean_matrix,
)

ENUMERATION_CAP = 2**20


@dataclass(frozen=True)
class SimParams:
    """Monte-Carlo protocol: trajectory count, length, burn-in, base seed."""

    samples: int = 500
    steps: int = 600
    burn_in: int = 100
    seed: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValidationError(f"samples must be >= 1, got {self.samples}")
        if self.burn_in < 0:
            raise ValidationError(f"burn_in must be >= 0, got {self.burn_in}")
        if self.steps <= self.burn_in:
            raise ValidationError(
                f"steps ({self.steps}) must exceed burn_in ({self.burn_in})"
            )


@dataclass(frozen=True)
class SgrEstimate:
    """Monte-Carlo estimate of the log stochastic growth rate."""

    log_sgr_mean: float
    std_error: float
    samples: int
    steps: int
    burn_in: int
    seed: int

    def confidence_band(self, width: float = 3.0) -> tuple[float, float]:
        return (
            self.log_sgr_mean - width * self.std_error,
            self.log_sgr_mean + width * self.std_error,
        )


def _cumulative_rows(rows: np.ndarray) -> np.ndarray:
    cum = np.cumsum(rows, axis=-1)
    cum[..., -1] = 1.0  # guard against round-off in the last column
    return cum


def engine_inputs(model: ModelSpec):
    """Arrays for the trajectory kernels: (mats, cum_rows, cum_init, z0)."""
    mats = np.ascontiguousarray(model.envs.matrices)
    cum_rows = _cumulative_rows(model.chain.transition_rows())
    cum_init = _cumulative_rows(stationary_distribution(model.chain)[None, :])
    z0 = model.initial_population[None, :]
    return mats, cum_rows, cum_init, z0


def trajectory_log_growth_values(model: ModelSpec, params: SimParams) -> np.ndarray:
    """Per-trajectory mean log growth; trajectory i uses substream(seed, i)."""
    engine.apply_thread_cap()
    mats, cum_rows, cum_init, z0 = engine_inputs(model)
    seeds = substream_array(params.seed, params.samples)
    model_of = np.zeros(params.samples, dtype=np.int64)
    values = engine.log_growth_batch(
        mats, cum_rows, cum_init, model_of, z0, seeds, params.steps, params.burn_in
    )
    if np.any(np.isnan(values)):
        raise NumericalError(
            f"{int(np.isnan(values).sum())} of {params.samples} trajectories hit "
            "an exactly zero population"
        )
    return values


def simulate_log_growth(model: ModelSpec, steps: int, burn_in: int, seed: int) -> float:
    """Single-trajectory time average of log ||A z|| after burn-in.

    The trajectory stream is keyed by ``seed`` directly; `estimate_sgr`
    runs trajectory i on ``substream(base_seed, i)``.
    """
    if steps <= burn_in or burn_in < 0:
        raise ValidationError(f"need steps > burn_in >= 0, got {steps}, {burn_in}")
    engine.apply_thread_cap()
    mats, cum_rows, cum_init, z0 = engine_inputs(model)
    seeds = np.array([seed & ((1 << 64) - 1)], dtype=np.uint64)
    value = engine.log_growth_batch(
        mats, cum_rows, cum_init, np.zeros(1, dtype=np.int64), z0, seeds, steps, burn_in
    )[0]
    if math.isnan(value):
        raise NumericalError("population hit exact zero during simulation")
    return float(value)


def estimate_sgr(model: ModelSpec, params: SimParams = SimParams()) -> SgrEstimate:
    """Monte-Carlo estimate of log lambda_S over independent trajectories.

    Deterministic: per-trajectory seeds derive from (seed, index) and the
    reduction runs in index order, so the result does not depend on worker
    count or execution order.
    """
    values = trajectory_log_growth_values(model, params)
    mean = float(values.mean())
    se = 0.0 if params.samples == 1 else float(values.std(ddof=1) / math.sqrt(params.samples))
    return SgrEstimate(mean, se, params.samples, params.steps, params.burn_in, params.seed)


def simulate_structure_range(
    model: ModelSpec, steps: int, seed: int, start: int = 50
) -> tuple[float, float]:
    """Observed min and max of the adult/juvenile ratio z2/z1 over steps start..steps."""
    if model.n != 2:
        raise ValidationError("structure ratio tracking is defined for two-stage models")
    if not 1 <= start <= steps:
        raise ValidationError(f"need 1 <= start <= steps, got {start}, {steps}")
    engine.apply_thread_cap()
    mats, cum_rows, cum_init, z0 = engine_inputs(model)
    seeds = np.array([seed & ((1 << 64) - 1)], dtype=np.uint64)
    lo, hi = engine.structure_ratio_extrema(
        mats, cum_rows, cum_init, np.zeros(1, dtype=np.int64), z0, seeds, steps, start
    )[0]
    if math.isnan(lo):
        raise NumericalError("population degenerated during structure tracking")
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# growth rate of the mean population size

def mean_population_operator(model: ModelSpec) -> np.ndarray:
    """Block matrix driving the state-resolved expected population.

    With m_k(t) = E[z(t); chain in state k], one step gives
    m_k(t+1) = A_k * sum_j P[j, k] m_j(t); stacking the m_k yields an
    (n*r) x (n*r) nonnegative matrix whose spectral radius is the growth
    rate of E||z(t)||.  Validated against exact path enumeration in tests.
    """
    rows = model.chain.transition_rows()
    n, r = model.n, model.r
    op = np.zeros((n * r, n * r))
    for target in range(r):
        block = model.envs.matrices[target]
        for source in range(r):
            op[target * n:(target + 1) * n, source * n:(source + 1) * n] = (
                rows[source, target] * block
            )
    return op


def mean_growth_rate(model: ModelSpec) -> float:
    """log of the growth rate of the expected total population size.

    Always an upper bound for the log SGR (Jensen).  For IID chains this is
    log of the spectral radius of the mean matrix; for Markov chains, of the
    state-resolved block operator.
    """
    if model.chain.kind == "iid":
        rho = spectral_radius(weighted_mean_matrix(model.envs, model.chain.pi))
    else:
        rho = spectral_radius(mean_population_operator(model))
    return math.log(rho) if rho > 0 else -math.inf


def exact_mean_norm(model: ModelSpec, t: int, cap: int = ENUMERATION_CAP) -> float:
    """E||z(t)|| by exhaustive enumeration of environment paths.

    Brute-force oracle for `mean_growth_rate`: weighs every length-t path by
    its probability (chain started from the stationary distribution).
    Refuses when r**t exceeds ``cap``.
    """
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    r, n = model.r, model.n
    needed = r**t
    if needed > cap:
        raise ValidationError(
            f"enumerating {r}**{t} = {needed} paths exceeds the cap of {cap}"
        )
    rows = model.chain.transition_rows()
    pi = stationary_distribution(model.chain)
    # state k with probability pi[k]; population starts at z0 on every path
    probs = pi.copy()
    states = np.arange(r)
    z = np.tile(model.initial_population, (r, 1))
    for _ in range(t):
        probs = (probs[:, None] * rows[states]).reshape(-1)
        z = np.stack([z @ model.envs.matrices[e].T for e in range(r)], axis=1).reshape(-1, n)
        states = np.tile(np.arange(r), states.size)
    return float(np.sum(probs * z.sum(axis=1)))


# ---------------------------------------------------------------------------
# second-order (small-noise) approximation

def tuljapurkar_approx(model: ModelSpec) -> float:
    """Second-order approximation to the log SGR for IID environments.

    log(rho_bar) - tau^2 / (2 rho_bar^2), where tau^2 is the variance of the
    sensitivity-weighted entry deviations: with S_ij the eigenvalue
    sensitivities of the mean matrix, tau^2 = Var_pi(<A_e - A_bar, S>).
    Usually a slight underestimate of the SGR; not a certified bound.
    """
    if model.chain.kind != "iid":
        raise UnsupportedModelError(
            "the second-order approximation is implemented for IID chains only; "
            "got a markov chain"
        )
    pi = model.chain.pi
    abar = weighted_mean_matrix(model.envs, pi)
    rho = spectral_radius(abar)
    if rho <= 0:
        raise NumericalError("mean matrix has zero spectral radius")
    w, v = dominant_eigenvectors(abar)
    sens = np.outer(w, v) / float(w @ v)
    loads = np.tensordot(model.envs.matrices - abar, sens, axes=([1, 2], [0, 1]))
    tau2 = float(pi @ (loads**2))
    return math.log(rho) - tau2 / (2.0 * rho * rho)
