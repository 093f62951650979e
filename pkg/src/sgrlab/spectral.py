"""Spectral and stationary computations on nonnegative matrices and chains."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .models import EnvironmentChain, EnvironmentSet, ModelSpec, incidence_pattern

DEFAULT_TOL = 1e-12
MAX_ITERATIONS = 100_000
DIRECT_SOLVE_MAX_STATES = 64


def spectral_radius(matrix, tol: float = DEFAULT_TOL, max_iterations: int = MAX_ITERATIONS) -> float:
    """Spectral radius of a nonnegative square matrix.

    Dimensions 1 and 2 use closed forms; larger matrices use power iteration
    on the matrix shifted by the identity (the shift removes periodicity, so
    the iteration converges for any nonnegative matrix).
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"spectral_radius needs a square matrix, got {a.shape}")
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    if n == 2:
        # largest root of x^2 - (a11+a22) x + det = 0; the discriminant
        # (a11-a22)^2 + 4 a12 a21 is nonnegative for nonnegative matrices
        tr_half = (a[0, 0] + a[1, 1]) / 2.0
        disc = (a[0, 0] - a[1, 1]) ** 2 + 4.0 * a[0, 1] * a[1, 0]
        return float(tr_half + math.sqrt(disc) / 2.0)
    return _power_radius(a, tol, max_iterations)


def _power_radius(a: np.ndarray, tol: float = DEFAULT_TOL, max_iterations: int = MAX_ITERATIONS) -> float:
    """Power iteration for the spectral radius of a nonnegative matrix.

    Stops when successive Rayleigh-quotient iterates differ by less than
    ``tol`` relative to the iterate scale.
    """
    n = a.shape[0]
    shifted = a + np.eye(n)
    v = np.full(n, 1.0 / n)
    lam = 1.0
    for it in range(max_iterations):
        w = shifted @ v
        norm = w.sum()  # 1-norm; w stays nonnegative
        if norm == 0.0:
            return 0.0  # only possible for the zero matrix
        lam_new = float(norm / v.sum())
        v = w / norm
        if abs(lam_new - lam) < tol * max(1.0, abs(lam_new)):
            return lam_new - 1.0
        lam = lam_new
    raise NumericalError(
        f"power iteration did not converge in {max_iterations} iterations "
        f"(last iterates {lam - 1.0!r}, {lam_new - 1.0!r}, tol={tol!r})"
    )


def dominant_eigenvectors(matrix, tol: float = 1e-14, max_iterations: int = MAX_ITERATIONS):
    """Left and right dominant eigenvectors (w, v) of a nonnegative matrix.

    Both are normalized to sum 1.  Used for eigenvalue sensitivities
    d(rho)/d(a_ij) = w_i v_j / <w, v>.
    """
    a = np.asarray(matrix, dtype=float)
    v = _power_vector(a, tol, max_iterations)
    w = _power_vector(a.T, tol, max_iterations)
    return w, v


def _power_vector(a: np.ndarray, tol: float, max_iterations: int) -> np.ndarray:
    n = a.shape[0]
    shifted = a + np.eye(n)
    v = np.full(n, 1.0 / n)
    for _ in range(max_iterations):
        w = shifted @ v
        norm = w.sum()
        if norm == 0.0:
            raise NumericalError("matrix has no nonnegative dominant eigenvector (zero iterate)")
        w /= norm
        if np.max(np.abs(w - v)) < tol:
            return w
        v = w
    raise NumericalError(f"eigenvector iteration did not converge in {max_iterations} iterations")


def stationary_distribution(chain: EnvironmentChain) -> np.ndarray:
    """Long-run occupation probabilities of the environmental chain.

    IID chains return their probability vector unchanged.  Markov chains are
    solved directly (pi P = pi, sum pi = 1) up to 64 states, by power
    iteration above that.
    """
    if chain.kind == "iid":
        return chain.pi
    P = chain.P
    r = P.shape[0]
    if r <= DIRECT_SOLVE_MAX_STATES:
        m = P.T - np.eye(r)
        m[-1, :] = 1.0
        b = np.zeros(r)
        b[-1] = 1.0
        pi = np.linalg.solve(m, b)
    else:
        pi = np.full(r, 1.0 / r)
        for _ in range(MAX_ITERATIONS):
            nxt = pi @ P
            nxt /= nxt.sum()
            if np.max(np.abs(nxt - pi)) < 1e-15:
                pi = nxt
                break
            pi = nxt
        else:
            raise NumericalError("stationary distribution iteration did not converge")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


@dataclass(frozen=True)
class ErgodicityResult:
    """Outcome of the ergodic-set check.

    ergodic      -- True when some fixed-length product of set members is
                    guaranteed strictly positive.
    g            -- smallest such product length (None when not ergodic).
    inconclusive -- True when the search hit g_max before either finding a
                    witness or saturating the set of reachable patterns.
    """

    ergodic: bool
    g: int | None
    inconclusive: bool = False


def check_ergodic_set(envs: EnvironmentSet, g_max: int = 50) -> ErgodicityResult:
    """Check whether every length-g product of set members is strictly positive.

    Works over the boolean semiring, so only the incidence patterns matter.
    Breadth-first over product length; the set of patterns reachable at each
    length is finite, so a repeated pattern set without a witness means no
    length will ever work.
    """
    patterns = [incidence_pattern(m) for m in envs.matrices]
    # a matrix with a zero row can always be leftmost in a product, and a
    # zero column rightmost; either keeps some entry of the product at zero
    for p in patterns:
        if np.any(~p.any(axis=1)) or np.any(~p.any(axis=0)):
            return ErgodicityResult(ergodic=False, g=None)

    current = frozenset(p.tobytes() for p in patterns)
    n = envs.n
    seen = {current}
    for g in range(1, g_max + 1):
        bufs = [np.frombuffer(b, dtype=bool).reshape(n, n) for b in current]
        if all(b.all() for b in bufs):
            return ErgodicityResult(ergodic=True, g=g)
        nxt = set()
        for b in bufs:
            for p in patterns:
                prod = (p.astype(np.uint8) @ b.astype(np.uint8)) > 0
                nxt.add(prod.tobytes())
        current = frozenset(nxt)
        if current in seen:
            return ErgodicityResult(ergodic=False, g=None)
        seen.add(current)
    return ErgodicityResult(ergodic=False, g=None, inconclusive=True)


def weighted_mean_matrix(envs: EnvironmentSet, pi: np.ndarray) -> np.ndarray:
    """Probability-weighted average of the environment matrices."""
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (envs.r,):
        raise ValidationError(f"need {envs.r} weights, got shape {pi.shape}")
    return np.tensordot(pi, envs.matrices, axes=1)


def mean_matrix(model: ModelSpec) -> np.ndarray:
    """Average environment matrix under the chain's stationary distribution."""
    return weighted_mean_matrix(model.envs, stationary_distribution(model.chain))


def net_reproductive_value(mean: np.ndarray) -> float:
    """Net reproductive value f + s*F of a two-age-class Leslie mean matrix.

    Its position relative to 1 matches that of the matrix's dominant
    eigenvalue, which makes it a convenient growth/decline indicator.
    """
    a = np.asarray(mean, dtype=float)
    if a.shape != (2, 2) or a[1, 1] != 0:
        raise ValidationError(
            "net reproductive value is defined for 2x2 matrices [[f, F], [s, 0]]"
        )
    return float(a[0, 0] + a[1, 0] * a[0, 1])
