"""Growth/extinction analysis for the rich/poor two-environment study.

Environment 1 is a growing two-age-class Leslie environment; environment 2
is identical except the adult fertility is reduced by an amount delta.  For
each lower-bound family the threshold below which delta still certifies
growth is computed, in closed form where one exists and by bisection
otherwise.  Certified thresholds are sufficient, never necessary: the true
viability threshold can only be larger.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import (
    BoundsReport,
    cohen_bounds,
    leslie2_structure_band,
    reference_bounds,
    structure_informed_bounds,
)
from .errors import ValidationError
from .estimate import SgrEstimate, SimParams, estimate_sgr
from .models import EnvironmentChain, Leslie2Params, ModelSpec, leslie2_params
from .spectral import net_reproductive_value, spectral_radius, stationary_distribution

DELTA_DOMAIN_MARGIN = 1e-12  # keep the reduced fertility strictly positive
FAMILY_NAMES = ("I", "II", "III", "IV", "V")
THRESHOLD_KEYS = ("Delta_I", "Delta_II_numeric", "Delta_III", "Delta_IV", "Delta_V_numeric")


@dataclass(frozen=True)
class RichPoorSpec:
    """Two-age-class rates plus the rich-environment probability.

    Requires f + s*F > 1 so that environment 1 alone sustains growth, and
    0 <= delta < F so the poor environment keeps a positive adult fertility.
    """

    f: float
    F: float
    s: float
    pi1: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.f > 0 and self.F > 0 and 0 < self.s <= 1):
            raise ValidationError(
                f"need f > 0, F > 0, 0 < s <= 1; got f={self.f}, F={self.F}, s={self.s}"
            )
        if not 0 < self.pi1 < 1:
            raise ValidationError(f"pi1 must lie in (0, 1), got {self.pi1}")
        if self.f + self.s * self.F <= 1:
            raise ValidationError(
                "environment 1 must be supercritical: need f + s*F > 1, "
                f"got {self.f + self.s * self.F}"
            )
        if not 0 <= self.delta < self.F:
            raise ValidationError(f"delta must lie in [0, F), got {self.delta}")

    @property
    def max_delta(self) -> float:
        return self.F - DELTA_DOMAIN_MARGIN

    def params_at(self, delta: float | None = None) -> Leslie2Params:
        d = self.delta if delta is None else delta
        return Leslie2Params(
            np.array([self.f, self.f]),
            np.array([self.F, self.F - d]),
            np.array([self.s, self.s]),
        )

    def model(self, delta: float | None = None) -> ModelSpec:
        return ModelSpec(
            self.params_at(delta).environment_set(labels=("rich", "poor")),
            EnvironmentChain.iid([self.pi1, 1.0 - self.pi1]),
        )


def lower_bound_value(
    spec: RichPoorSpec, delta: float, family: str, support_only: bool = False
) -> float:
    """The named lower bound evaluated on the rich/poor model at ``delta``."""
    if family not in FAMILY_NAMES:
        raise ValidationError(f"family must be one of {FAMILY_NAMES}, got {family!r}")
    params = spec.params_at(delta)
    envs = params.environment_set()
    pi = np.array([spec.pi1, 1.0 - spec.pi1])
    if family == "I":
        return cohen_bounds(envs, pi)[0]
    if family == "V":
        return structure_informed_bounds(envs, pi, leslie2_structure_band(params))[0]
    which = {"II": "mean", "III": "max", "IV": "min"}[family]
    return reference_bounds(envs, pi, which, support_only)[0]


def _clamped(spec: RichPoorSpec, value: float) -> float:
    return float(min(max(value, 0.0), spec.max_delta))


def delta_threshold_closed(spec: RichPoorSpec, family: str) -> float:
    """Closed-form fertility-reduction threshold for families I, III and IV.

    Negative formula values clamp to 0 (the bound certifies nothing), values
    beyond the admissible range clamp to just under F.  Family I splits on
    whether the adult fertility exceeds the first column sum; at F exactly 1
    neither branch applies and the threshold is found numerically instead.
    """
    exponent = 1.0 / (spec.pi1 - 1.0)  # negative: pi1 in (0, 1)
    if family == "I":
        if spec.F > 1:
            return _clamped(spec, spec.F - (spec.f + spec.s) ** (spec.pi1 * exponent))
        if spec.F < 1:
            return _clamped(spec, spec.F * (1.0 - spec.F**exponent))
        return delta_threshold_numeric(spec, "I")
    if family == "III":
        rho_rich = spectral_radius(np.array([[spec.f, spec.F], [spec.s, 0.0]]))
        return _clamped(spec, spec.F * (1.0 - rho_rich**exponent))
    if family == "IV":
        return _clamped(spec, spec.F - (1.0 - spec.f) / spec.s)
    raise ValidationError(f"no closed form for family {family!r} (use delta_threshold_numeric)")


def delta_threshold_numeric(spec: RichPoorSpec, bound, tol: float = 1e-9) -> float:
    """Largest delta at which a lower bound still certifies growth, by bisection.

    ``bound`` is a family name or any callable delta -> value, assumed
    continuous and strictly decreasing where it matters (true for every
    implemented family: only the poor-environment fertility F - delta moves).
    Returns 0 when the bound certifies nothing even at delta = 0, and the
    top of the admissible range when it certifies everything below F.
    """
    if callable(bound):
        g = bound
    else:
        g = lambda d: lower_bound_value(spec, d, bound)  # noqa: E731
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    lo, hi = 0.0, spec.max_delta
    if g(lo) <= 0:
        return 0.0
    if g(hi) > 0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DeltaAnalysis:
    """All fertility-reduction thresholds for one rich/poor configuration.

    ``winners`` lists every certified family whose threshold attains the
    maximum (within 1e-9); ``winner`` is the first of those in family order.
    ``Delta_sim``, when present, is the simulated-SGR root: an estimate of
    the true viability threshold, not a certificate.
    """

    thresholds: dict
    winner: str
    winners: tuple[str, ...]

    def to_jsonable(self) -> dict:
        return {
            "thresholds": dict(self.thresholds),
            "winner": self.winner,
            "winners": list(self.winners),
        }


def analyze_delta(
    spec: RichPoorSpec, tol: float = 1e-9, sim: SimParams | None = None
) -> DeltaAnalysis:
    """Thresholds for every family, plus the simulated root when requested."""
    thresholds = {
        "Delta_I": delta_threshold_closed(spec, "I"),
        "Delta_II_numeric": delta_threshold_numeric(spec, "II", tol),
        "Delta_III": delta_threshold_closed(spec, "III"),
        "Delta_IV": delta_threshold_closed(spec, "IV"),
        "Delta_V_numeric": delta_threshold_numeric(spec, "V", tol),
    }
    best = max(thresholds.values())
    winners = tuple(k for k in THRESHOLD_KEYS if thresholds[k] >= best - 1e-9)
    if sim is not None:
        sim_tol = max(tol, 1e-4)  # finer roots than this are sampling noise

        def simulated(delta: float) -> float:
            return estimate_sgr(spec.model(delta), sim).log_sgr_mean

        thresholds["Delta_sim"] = delta_threshold_numeric(spec, simulated, sim_tol)
    return DeltaAnalysis(thresholds=thresholds, winner=winners[0], winners=winners)


# ---------------------------------------------------------------------------
# growth/extinction classification

@dataclass(frozen=True)
class Classification:
    """Verdict from certified bounds: growth, extinction or indeterminate.

    A positive best lower bound proves growth; a negative best upper bound
    proves extinction; anything else is indeterminate (annotated with the
    SGR estimate when one is supplied).  For two-age-class IID models the
    net reproductive value of the mean matrix is reported as well: below 1
    it is sufficient for extinction.
    """

    status: str
    best_lower: tuple[str, float]
    best_upper: tuple[str, float]
    sgr: SgrEstimate | None = None
    r0: float | None = None

    def to_jsonable(self) -> dict:
        doc = {
            "status": self.status,
            "best_lower": {"name": self.best_lower[0], "value": self.best_lower[1]},
            "best_upper": {"name": self.best_upper[0], "value": self.best_upper[1]},
        }
        if self.sgr is not None:
            doc["sgr"] = {
                "log_sgr_mean": self.sgr.log_sgr_mean,
                "std_error": self.sgr.std_error,
            }
        if self.r0 is not None:
            doc["r0"] = self.r0
            doc["r0_sufficient_for_extinction"] = self.r0 < 1
        return doc


def classify(
    model: ModelSpec, report: BoundsReport, sgr: SgrEstimate | None = None
) -> Classification:
    """Classify a model from its bounds report.

    Only certified bounds decide the status; the second-order approximation
    never does.
    """
    if report.best_lower[1] is not None and report.best_lower[1] > 0:
        status = "growth"
    elif report.best_upper[1] is not None and report.best_upper[1] < 0:
        status = "extinction"
    else:
        status = "indeterminate"
    r0 = None
    if model.chain.kind == "iid" and leslie2_params(model.envs) is not None:
        pi = stationary_distribution(model.chain)
        mean = np.tensordot(pi, model.envs.matrices, axes=1)
        r0 = net_reproductive_value(mean)
    return Classification(status, report.best_lower, report.best_upper, sgr=sgr, r0=r0)
