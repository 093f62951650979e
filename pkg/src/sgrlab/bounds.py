"""Closed-form lower and upper bounds for the log stochastic growth rate.

Six families, all cheap to evaluate:

  c_I / C_I      column-sum (Cohen) bounds; need no structure at all
  c_min / C_max  spectral radii of the entrywise min/max matrices
  c_II / C_II    perturbation bounds against the mean matrix
  c_III / C_III  perturbation bounds against the entrywise max matrix
  c_IV / C_IV    perturbation bounds against the entrywise min matrix
  c_V / C_V      bounds using the asymptotic band of the age structure
                 (two-age-class Leslie models, or a user-supplied band)

log_mu (growth rate of the mean population) is always an upper bound; the
second-order approximation log_lambda_T is reported alongside the bounds but
is an approximation, never certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .estimate import mean_growth_rate, tuljapurkar_approx
from .models import EnvironmentSet, Leslie2Params, ModelSpec, incidence_pattern, leslie2_params
from .spectral import spectral_radius, stationary_distribution, weighted_mean_matrix

LOWER_NAMES = ("c_I", "c_II", "c_III", "c_IV", "c_V", "c_min")
UPPER_NAMES = ("C_I", "C_II", "C_III", "C_IV", "C_V", "C_max", "log_mu", "log_lambda_T")
ANNOTATION_NAMES = ("log_lambda_T",)  # reported, but never certified


def column_sums(matrix) -> np.ndarray:
    """Column sums of a projection matrix (total per-class output rates)."""
    return np.asarray(matrix, dtype=float).sum(axis=0)


def _check_weights(envs: EnvironmentSet, pi) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (envs.r,):
        raise ValidationError(f"need {envs.r} probabilities, got shape {pi.shape}")
    return pi


def _weighted_log(pi: np.ndarray, values: np.ndarray) -> float:
    """sum_e pi_e log(values_e) on the extended real line (log 0 = -inf)."""
    mask = pi > 0
    vals = values[mask]
    if np.any(vals == 0):
        return -math.inf
    return float(pi[mask] @ np.log(vals))


def cohen_bounds(envs: EnvironmentSet, pi) -> tuple[float, float]:
    """Probability-weighted log of the extreme column sums.

    Exact precisely when every environment matrix is a scalar multiple of
    one column-stochastic matrix; a zero column sum makes the lower bound
    -inf (reported as such, not an error).
    """
    pi = _check_weights(envs, pi)
    sums = envs.matrices.sum(axis=1)  # (r, n)
    return (
        _weighted_log(pi, sums.min(axis=1)),
        _weighted_log(pi, sums.max(axis=1)),
    )


def maxmin_bounds(envs: EnvironmentSet) -> tuple[float, float]:
    """log spectral radii of the entrywise min and max matrices.

    Independent of the environment distribution, hence loose whenever the
    extreme environments are rare.
    """
    lo = spectral_radius(envs.matrices.min(axis=0))
    hi = spectral_radius(envs.matrices.max(axis=0))
    return (
        math.log(lo) if lo > 0 else -math.inf,
        math.log(hi) if hi > 0 else -math.inf,
    )


@dataclass(frozen=True)
class PerturbationProfile:
    """Extreme relative deviations of each environment from a reference matrix.

    w_min[e] and w_max[e] bound (A_e[ij] - B[ij]) / B[ij].  With
    support_only=False the extrema also range over the structural zeros
    (where the deviation is defined as 0), which clamps w_min <= 0 <= w_max;
    support_only=True restricts to the support and is tighter.
    """

    w_min: np.ndarray
    w_max: np.ndarray
    support_only: bool = False

    def __post_init__(self):
        if np.any(self.w_min <= -1) or np.any(self.w_max < self.w_min):
            raise ValidationError("perturbation extrema must satisfy -1 < w_min <= w_max")


def _deviation_extrema(a: np.ndarray, b: np.ndarray, support: np.ndarray, support_only: bool):
    if not support.any():
        return 0.0, 0.0
    ratios = a[support] / b[support] - 1.0
    w_min = float(ratios.min())
    w_max = float(ratios.max())
    if not support_only and not support.all():
        w_min = min(w_min, 0.0)
        w_max = max(w_max, 0.0)
    return w_min, w_max


def perturbation_profile(
    envs: EnvironmentSet, reference, support_only: bool = False
) -> PerturbationProfile:
    """Relative deviation range of every environment against one reference.

    The reference must be nonnegative with exactly the environments' common
    incidence pattern, otherwise the multiplicative comparison is undefined.
    """
    b = np.asarray(reference, dtype=float)
    if b.shape != (envs.n, envs.n):
        raise ValidationError(f"reference must be {envs.n}x{envs.n}, got {b.shape}")
    pattern = envs.pattern  # raises when the set has no common pattern
    if not np.array_equal(incidence_pattern(b), pattern):
        raise ValidationError(
            "reference matrix must share the environments' incidence pattern"
        )
    w_min = np.empty(envs.r)
    w_max = np.empty(envs.r)
    for e in range(envs.r):
        w_min[e], w_max[e] = _deviation_extrema(envs.matrices[e], b, pattern, support_only)
    return PerturbationProfile(w_min, w_max, support_only)


def perturbation_bounds(
    envs: EnvironmentSet, pi, reference, support_only: bool = False
) -> tuple[float, float]:
    """log rho(reference) shifted by the mean log extreme deviation factors.

    Valid for any reference with the right pattern; collapses to
    log rho(A) when there is no environmental variation.
    """
    pi = _check_weights(envs, pi)
    profile = perturbation_profile(envs, reference, support_only)
    rho = spectral_radius(np.asarray(reference, dtype=float))
    base = math.log(rho) if rho > 0 else -math.inf
    return (
        base + float(pi @ np.log1p(profile.w_min)),
        base + float(pi @ np.log1p(profile.w_max)),
    )


def reference_matrix(envs: EnvironmentSet, pi, which: str) -> np.ndarray:
    """The three standard perturbation references: mean, max or min matrix."""
    if which == "mean":
        return weighted_mean_matrix(envs, np.asarray(pi, dtype=float))
    if which == "max":
        return envs.matrices.max(axis=0)
    if which == "min":
        return envs.matrices.min(axis=0)
    raise ValidationError(f"reference must be 'mean', 'max' or 'min', got {which!r}")


def reference_bounds(
    envs: EnvironmentSet, pi, which: str, support_only: bool = False
) -> tuple[float, float]:
    """Perturbation bounds with the mean/max/min matrix as reference."""
    return perturbation_bounds(envs, pi, reference_matrix(envs, pi, which), support_only)


def general_perturbation_relation(
    envs_a: EnvironmentSet, envs_b: EnvironmentSet, pi, support_only: bool = False
) -> tuple[float, float]:
    """Offsets relating the SGRs of two systems driven by the same chain.

    Comparing A_e against B_e environmentwise gives
    log sgr(B) + lower <= log sgr(A) <= log sgr(B) + upper.
    Requires matching incidence patterns per environment and ergodicity of
    both sets (assumed, not checked).
    """
    if envs_a.r != envs_b.r or envs_a.n != envs_b.n:
        raise ValidationError(
            f"systems differ in size: ({envs_a.r},{envs_a.n}) vs ({envs_b.r},{envs_b.n})"
        )
    pi = _check_weights(envs_a, pi)
    lo = np.empty(envs_a.r)
    hi = np.empty(envs_a.r)
    for e in range(envs_a.r):
        a, b = envs_a.matrices[e], envs_b.matrices[e]
        support = incidence_pattern(b)
        if not np.array_equal(incidence_pattern(a), support):
            raise ValidationError(f"incidence patterns differ in environment {e}")
        lo[e], hi[e] = _deviation_extrema(a, b, support, support_only)
    return float(pi @ np.log1p(lo)), float(pi @ np.log1p(hi))


# ---------------------------------------------------------------------------
# age-structure band for two-age-class Leslie models

@dataclass(frozen=True)
class StructureBand:
    """Asymptotic bounds on the age structure of a two-age-class model.

    delta and kappa bracket the adult/juvenile ratio z2/z1 for large times;
    lower and upper bracket the normalized structure z/||z|| componentwise,
    ordered like the population vector (juvenile fraction, adult fraction).
    """

    delta: float
    kappa: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if not (0 < self.delta <= self.kappa):
            raise ValidationError(f"need 0 < delta <= kappa, got {self.delta}, {self.kappa}")
        if np.any(self.lower < 0) or np.any(self.upper < self.lower):
            raise ValidationError("structure band must satisfy 0 <= lower <= upper")


def leslie2_structure_band(params: Leslie2Params) -> StructureBand:
    """Closed-form band for the long-run adult/juvenile ratio.

    Built from the extreme fertility and survival ratios; both endpoints are
    adult/juvenile ratios of dominant eigenvectors of two-step products of
    the extreme (fertility-normalized) matrices.  In the deterministic case
    delta = kappa = s / rho(A), so the band is exact.
    """
    fert_ratio = params.F / params.f
    surv_ratio = params.s / params.f
    em, eM = float(fert_ratio.min()), float(fert_ratio.max())
    gm, gM = float(surv_ratio.min()), float(surv_ratio.max())
    low, high = em * gm, eM * gM
    root = math.sqrt(1.0 + (high - low) ** 2 + 2.0 * (high + low))
    delta = 2.0 * gm / (1.0 - low + high + root)
    kappa = 2.0 * gM / (1.0 - high + low + root)
    lower = np.array([1.0 / (1.0 + kappa), delta / (1.0 + kappa)])
    upper = np.array([1.0 / (1.0 + delta), kappa / (1.0 + delta)])
    return StructureBand(delta, kappa, lower, upper)


def structure_informed_bounds(envs: EnvironmentSet, pi, band) -> tuple[float, float]:
    """Bounds from a componentwise band on the asymptotic population structure.

    ``band`` is a StructureBand or an explicit (lower, upper) pair of
    length-n nonnegative vectors bracketing z/||z|| for large times (the
    caller is responsible for their validity in the general case).  One step
    of growth then lies between the band-weighted column sums.
    """
    pi = _check_weights(envs, pi)
    if isinstance(band, StructureBand):
        lower, upper = band.lower, band.upper
    else:
        lower, upper = (np.asarray(v, dtype=float) for v in band)
    for name, v in (("lower", lower), ("upper", upper)):
        if v.shape != (envs.n,):
            raise ValidationError(f"{name} structure vector must have length {envs.n}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValidationError(f"{name} structure vector must be finite and >= 0")
    sums = envs.matrices.sum(axis=1)  # (r, n)
    return (
        _weighted_log(pi, sums @ lower),
        _weighted_log(pi, sums @ upper),
    )


# ---------------------------------------------------------------------------
# the full report

@dataclass
class BoundsReport:
    """Every bound family evaluated on one model.

    ``lower`` and ``upper`` map bound names to values; None marks a bound
    that does not apply to the model (reason in ``notes``).  ``log_lambda_T``
    appears under ``upper`` for completeness but is an approximation: it is
    excluded from ``best_upper`` and from certification.
    """

    lower: dict
    upper: dict
    best_lower: tuple[str, float]
    best_upper: tuple[str, float]
    notes: dict

    def applicable_lower(self) -> dict:
        return {k: v for k, v in self.lower.items() if v is not None}

    def certified_upper(self) -> dict:
        return {
            k: v for k, v in self.upper.items()
            if v is not None and k not in ANNOTATION_NAMES
        }

    def to_jsonable(self) -> dict:
        def enc(v):
            if v is None:
                return "n/a"
            if v == -math.inf:
                return "-inf"
            return v

        return {
            "lower": {k: enc(v) for k, v in self.lower.items()},
            "upper": {k: enc(v) for k, v in self.upper.items()},
            "best_lower": {"name": self.best_lower[0], "value": enc(self.best_lower[1])},
            "best_upper": {"name": self.best_upper[0], "value": enc(self.best_upper[1])},
            "notes": dict(self.notes),
        }


def _best(candidates: dict, names: tuple, pick_max: bool) -> tuple[str, float]:
    best_name, best_val = None, None
    for name in names:
        v = candidates.get(name)
        if v is None:
            continue
        if best_val is None or (v > best_val if pick_max else v < best_val):
            best_name, best_val = name, v
    return best_name, best_val


def all_bounds(
    model: ModelSpec,
    support_only: bool = False,
    structure: StructureBand | tuple | None = None,
) -> BoundsReport:
    """Evaluate every applicable bound family on a model.

    Bounds that do not apply (no common incidence pattern, no two-age-class
    structure, Markov chain for the second-order approximation) are reported
    as None with an explanatory note, never silently dropped.
    """
    envs = model.envs
    pi = stationary_distribution(model.chain)
    lower: dict = dict.fromkeys(LOWER_NAMES)
    upper: dict = dict.fromkeys(UPPER_NAMES)
    notes: dict = {}

    lower["c_I"], upper["C_I"] = cohen_bounds(envs, pi)
    lower["c_min"], upper["C_max"] = maxmin_bounds(envs)

    if envs.has_common_pattern:
        for roman, which in (("II", "mean"), ("III", "max"), ("IV", "min")):
            c, up = reference_bounds(envs, pi, which, support_only)
            lower[f"c_{roman}"] = c
            upper[f"C_{roman}"] = up
    else:
        msg = "requires a common incidence pattern across environments"
        for name in ("c_II", "c_III", "c_IV", "C_II", "C_III", "C_IV"):
            notes[name] = msg

    band = structure
    if band is None:
        params = leslie2_params(envs)
        if params is not None:
            band = leslie2_structure_band(params)
    if band is not None:
        lower["c_V"], upper["C_V"] = structure_informed_bounds(envs, pi, band)
    else:
        msg = "requires two-age-class Leslie structure or an explicit structure band"
        notes["c_V"] = msg
        notes["C_V"] = msg

    upper["log_mu"] = mean_growth_rate(model)
    if model.chain.kind == "iid":
        try:
            upper["log_lambda_T"] = tuljapurkar_approx(model)
        except NumericalError as exc:
            notes["log_lambda_T"] = str(exc)
    else:
        notes["log_lambda_T"] = "second-order approximation is available for IID chains only"

    certified_upper = tuple(n for n in UPPER_NAMES if n not in ANNOTATION_NAMES)
    return BoundsReport(
        lower=lower,
        upper=upper,
        best_lower=_best(lower, LOWER_NAMES, pick_max=True),
        best_upper=_best(upper, certified_upper, pick_max=False),
        notes=notes,
    )
