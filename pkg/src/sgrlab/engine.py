"""JIT-compiled trajectory kernels.

All Monte-Carlo work funnels through `log_growth_batch`: a batch holds B
trajectories, each tied to one of M models through `model_of`.  Trajectory i
consumes only its own counter-based stream (splitmix64 keyed by seeds[i]),
and writes only out[i], so results are bit-identical for any batch split or
thread count.

Layout conventions:
  mats      (M*r, n, n)  environment matrices, model-major
  cum_rows  (M*r, r)     cumulative transition rows, last column == 1.0
  cum_init  (M, r)       cumulative start-state distribution, last == 1.0
  z0        (M, n)       initial population per model
"""

from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange

from .errors import ValidationError

# workqueue is available everywhere; probing the fancier layers warns on
# some installs
numba.config.THREADING_LAYER = "workqueue"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, inline="always")
def _mix64(x):
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit(cache=True, inline="always")
def _uniform(seed, counter):
    # counter 0 draws the start state, counters 1..T drive the transitions
    return (_mix64(seed + np.uint64(counter) * _GOLDEN) >> np.uint64(11)) * _UNIT


@njit(cache=True, inline="always")
def _pick_state(cum_row, u):
    state = 0
    for k in range(cum_row.shape[0] - 1):
        if u >= cum_row[k]:
            state = k + 1
    return state


@njit(cache=True, parallel=True)
def log_growth_batch(mats, cum_rows, cum_init, model_of, z0, seeds, steps, burn_in):
    """Per-trajectory mean of log ||A z|| over steps burn_in+1 .. steps.

    The population vector is renormalized to unit 1-norm every step, so no
    trajectory can overflow regardless of length.  A trajectory whose
    population hits exact zero reports NaN.
    """
    B = seeds.shape[0]
    n = mats.shape[1]
    r = cum_rows.shape[1]
    out = np.empty(B)
    for i in prange(B):
        sd = seeds[i]
        m = model_of[i]
        base = m * r
        z = np.empty(n)
        znew = np.empty(n)
        for a in range(n):
            z[a] = z0[m, a]
        state = _pick_state(cum_init[m], _uniform(sd, 0))
        acc = 0.0
        failed = False
        for t in range(steps):
            state = _pick_state(cum_rows[base + state], _uniform(sd, t + 1))
            j = base + state
            norm = 0.0
            for a in range(n):
                x = 0.0
                for b in range(n):
                    x += mats[j, a, b] * z[b]
                znew[a] = x
                norm += x
            if norm <= 0.0:
                failed = True
                break
            if t >= burn_in:
                acc += np.log(norm)
            for a in range(n):
                z[a] = znew[a] / norm
        out[i] = np.nan if failed else acc / (steps - burn_in)
    return out


@njit(cache=True, parallel=True)
def structure_ratio_extrema(mats, cum_rows, cum_init, model_of, z0, seeds, steps, start):
    """Min and max of z2/z1 over steps start .. steps (two-stage models only)."""
    B = seeds.shape[0]
    r = cum_rows.shape[1]
    out = np.empty((B, 2))
    for i in prange(B):
        sd = seeds[i]
        m = model_of[i]
        base = m * r
        z1 = z0[m, 0]
        z2 = z0[m, 1]
        state = _pick_state(cum_init[m], _uniform(sd, 0))
        lo = np.inf
        hi = -np.inf
        for t in range(steps):
            state = _pick_state(cum_rows[base + state], _uniform(sd, t + 1))
            j = base + state
            n1 = mats[j, 0, 0] * z1 + mats[j, 0, 1] * z2
            n2 = mats[j, 1, 0] * z1 + mats[j, 1, 1] * z2
            norm = n1 + n2
            if norm <= 0.0 or n1 <= 0.0:
                lo = np.nan
                hi = np.nan
                break
            z1 = n1 / norm
            z2 = n2 / norm
            if t + 1 >= start:
                ratio = z2 / z1
                if ratio < lo:
                    lo = ratio
                if ratio > hi:
                    hi = ratio
        out[i, 0] = lo
        out[i, 1] = hi
    return out


def apply_thread_cap():
    """Honor the SGRLAB_THREADS worker cap (default: all available cores)."""
    value = os.environ.get("SGRLAB_THREADS")
    if value is None:
        return
    try:
        requested = int(value)
    except ValueError as exc:
        raise ValidationError(f"SGRLAB_THREADS must be an integer, got {value!r}") from exc
    if requested < 1:
        raise ValidationError(f"SGRLAB_THREADS must be >= 1, got {requested}")
    numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))
