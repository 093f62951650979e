"""Grid studies over random two-age-class Leslie models with two environments.

The harness sweeps a Cartesian grid of vital rates and environment
probabilities, evaluates every bound and a Monte-Carlo SGR estimate at each
point, and aggregates which bounds win and how large their errors are as a
function of environmental variation.

Bounds on the grid are computed by a vectorized closed-form table (the
reference implementation in `sgrlab.bounds` would dominate the runtime at
hundreds of thousands of points); tests pin the two implementations against
each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .bounds import all_bounds
from .errors import ValidationError
from .estimate import SimParams, estimate_sgr
from .extinction import RichPoorSpec
from .seeding import substream_array

# tie-break orders for the win tables; the mean-growth upper bound leads its
# table because it is the recommended default choice of upper bound
LOWER_TABLE = ("c_I", "c_II", "c_III", "c_IV", "c_V")
UPPER_TABLE = ("log_mu", "C_I", "C_II", "C_III", "C_IV", "C_V")

# bounds this close to the best count as tied: mathematically equal families
# can drift apart by round-off since they use different closed forms
TIE_TOL = 1e-12

BOUND_COLUMNS = (
    "c_I", "c_II", "c_III", "c_IV", "c_V", "c_min",
    "C_I", "C_II", "C_III", "C_IV", "C_V", "C_max", "log_mu", "log_lambda_T",
)

SIM_CHUNK_TRAJECTORIES = 500_000


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid over (pi1, f1, f2, F1, F2, s1, s2).

    Defaults are a desk-scale version of the full study: step 0.4 instead of
    0.2 and three instead of five environment probabilities.
    """

    pi1_values: tuple = (0.1, 0.5, 0.9)
    f_range: tuple = (0.1, 3.0)
    F_range: tuple = (0.1, 5.0)
    s_range: tuple = (0.1, 0.9)
    step: float = 0.4

    def __post_init__(self):
        if self.step <= 0:
            raise ValidationError(f"step must be positive, got {self.step}")
        if not self.pi1_values or not all(0 < p < 1 for p in self.pi1_values):
            raise ValidationError("pi1 values must lie strictly between 0 and 1")
        for name, (lo, hi) in (("f", self.f_range), ("F", self.F_range), ("s", self.s_range)):
            if not (0 < lo <= hi):
                raise ValidationError(f"{name} range must satisfy 0 < lo <= hi, got {lo}, {hi}")
        if self.s_range[1] > 1:
            raise ValidationError(f"s values must stay <= 1, got upper {self.s_range[1]}")

    def f_values(self) -> np.ndarray:
        return _axis(*self.f_range, self.step)

    def F_values(self) -> np.ndarray:
        return _axis(*self.F_range, self.step)

    def s_values(self) -> np.ndarray:
        return _axis(*self.s_range, self.step)

    @property
    def n_points(self) -> int:
        nf, nF, ns = len(self.f_values()), len(self.F_values()), len(self.s_values())
        return len(self.pi1_values) * nf * nf * nF * nF * ns * ns

    def parameter_table(self) -> dict:
        """Grid points as flat arrays, iterating pi1, f1, f2, F1, F2, s1, s2."""
        axes = (
            np.asarray(self.pi1_values, dtype=float),
            self.f_values(), self.f_values(),
            self.F_values(), self.F_values(),
            self.s_values(), self.s_values(),
        )
        grids = np.meshgrid(*axes, indexing="ij")
        names = ("pi1", "f1", "f2", "F1", "F2", "s1", "s2")
        return {name: g.reshape(-1) for name, g in zip(names, grids)}


# ---------------------------------------------------------------------------
# vectorized closed forms (two environments, IID, Leslie-2)

def _leslie_rho(f, F, s):
    return (f + np.sqrt(f * f + 4.0 * F * s)) / 2.0


def leslie2_iid_bound_table(params: dict, support_only: bool = False) -> dict:
    """All bound families over arrays of two-environment Leslie-2 IID models.

    ``params`` holds equal-length arrays pi1, f1, f2, F1, F2, s1, s2.
    Returns one array per bound name plus the second-order approximation.
    Matches `sgrlab.bounds.all_bounds` to floating-point round-off.
    """
    pi1, f1, f2 = params["pi1"], params["f1"], params["f2"]
    F1, F2, s1, s2 = params["F1"], params["F2"], params["s1"], params["s2"]
    pi2 = 1.0 - pi1
    out = {}

    a1, a2 = f1 + s1, f2 + s2  # first-column sums; second columns are F1, F2
    out["c_I"] = pi1 * np.log(np.minimum(a1, F1)) + pi2 * np.log(np.minimum(a2, F2))
    out["C_I"] = pi1 * np.log(np.maximum(a1, F1)) + pi2 * np.log(np.maximum(a2, F2))

    fm, FM_min, sm = np.minimum(f1, f2), np.minimum(F1, F2), np.minimum(s1, s2)
    fM, FM_max, sM = np.maximum(f1, f2), np.maximum(F1, F2), np.maximum(s1, s2)
    out["c_min"] = np.log(_leslie_rho(fm, FM_min, sm))
    out["C_max"] = np.log(_leslie_rho(fM, FM_max, sM))

    fb = pi1 * f1 + pi2 * f2
    Fb = pi1 * F1 + pi2 * F2
    sb = pi1 * s1 + pi2 * s2
    rho_mean = _leslie_rho(fb, Fb, sb)
    out["log_mu"] = np.log(rho_mean)

    def ratio_range(f, F, s, rf, rF, rs):
        lo = np.minimum(np.minimum(f / rf, F / rF), s / rs)
        hi = np.maximum(np.maximum(f / rf, F / rF), s / rs)
        if not support_only:  # the structural zero contributes a unit factor
            lo = np.minimum(lo, 1.0)
            hi = np.maximum(hi, 1.0)
        return lo, hi

    for name, (rf, rF, rs, base) in {
        "II": (fb, Fb, sb, out["log_mu"]),
        "III": (fM, FM_max, sM, out["C_max"]),
        "IV": (fm, FM_min, sm, out["c_min"]),
    }.items():
        lo1, hi1 = ratio_range(f1, F1, s1, rf, rF, rs)
        lo2, hi2 = ratio_range(f2, F2, s2, rf, rF, rs)
        out[f"c_{name}"] = base + pi1 * np.log(lo1) + pi2 * np.log(lo2)
        out[f"C_{name}"] = base + pi1 * np.log(hi1) + pi2 * np.log(hi2)

    eps1, eps2 = F1 / f1, F2 / f2
    gam1, gam2 = s1 / f1, s2 / f2
    low = np.minimum(eps1, eps2) * np.minimum(gam1, gam2)
    high = np.maximum(eps1, eps2) * np.maximum(gam1, gam2)
    root = np.sqrt(1.0 + (high - low) ** 2 + 2.0 * (high + low))
    delta = 2.0 * np.minimum(gam1, gam2) / (1.0 - low + high + root)
    kappa = 2.0 * np.maximum(gam1, gam2) / (1.0 - high + low + root)
    out["c_V"] = pi1 * np.log((f1 + s1 + F1 * delta) / (1.0 + kappa)) + pi2 * np.log(
        (f2 + s2 + F2 * delta) / (1.0 + kappa)
    )
    out["C_V"] = pi1 * np.log((f1 + s1 + F1 * kappa) / (1.0 + delta)) + pi2 * np.log(
        (f2 + s2 + F2 * kappa) / (1.0 + delta)
    )

    # second-order approximation from the eigenvalue sensitivities of the
    # mean matrix: S = outer(w, v) / <w, v> with w = (1, Fb/rho), v = (1, sb/rho)
    denom = 1.0 + Fb * sb / (rho_mean * rho_mean)
    s11 = 1.0 / denom
    s12 = (sb / rho_mean) / denom
    s21 = (Fb / rho_mean) / denom
    load1 = (f1 - fb) * s11 + (F1 - Fb) * s12 + (s1 - sb) * s21
    load2 = (f2 - fb) * s11 + (F2 - Fb) * s12 + (s2 - sb) * s21
    tau2 = pi1 * load1**2 + pi2 * load2**2
    out["log_lambda_T"] = out["log_mu"] - tau2 / (2.0 * rho_mean * rho_mean)
    return out


def environmental_variation(params: dict) -> np.ndarray:
    """Relative environmental variation (%) of each grid point.

    Sum of absolute rate differences over the sum of the larger rates.
    """
    num = (
        np.abs(params["f2"] - params["f1"])
        + np.abs(params["s2"] - params["s1"])
        + np.abs(params["F2"] - params["F1"])
    )
    den = (
        np.maximum(params["f1"], params["f2"])
        + np.maximum(params["s1"], params["s2"])
        + np.maximum(params["F1"], params["F2"])
    )
    return 100.0 * num / den


def simulate_grid_sgr(params: dict, sim: SimParams) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo log-SGR estimate and standard error at every grid point.

    Point k runs `sim.samples` trajectories seeded from
    substream(substream(sim.seed, k), j); identical to calling
    `estimate_sgr` on the point's model with that derived seed.
    """
    engine.apply_thread_cap()
    n_points = params["pi1"].size
    n = sim.samples
    mean = np.empty(n_points)
    se = np.empty(n_points)
    chunk = max(1, SIM_CHUNK_TRAJECTORIES // n)
    point_seeds = substream_array(sim.seed, n_points)
    for start in range(0, n_points, chunk):
        stop = min(start + chunk, n_points)
        g = stop - start
        mats = np.zeros((g * 2, 2, 2))
        mats[0::2, 0, 0] = params["f1"][start:stop]
        mats[0::2, 0, 1] = params["F1"][start:stop]
        mats[0::2, 1, 0] = params["s1"][start:stop]
        mats[1::2, 0, 0] = params["f2"][start:stop]
        mats[1::2, 0, 1] = params["F2"][start:stop]
        mats[1::2, 1, 0] = params["s2"][start:stop]
        pi1 = params["pi1"][start:stop]
        cum_init = np.stack([pi1, np.ones(g)], axis=1)
        cum_rows = np.repeat(cum_init, 2, axis=0)
        z0 = np.full((g, 2), 0.5)
        model_of = np.repeat(np.arange(g, dtype=np.int64), n)
        seeds = np.concatenate(
            [substream_array(int(point_seeds[k]), n) for k in range(start, stop)]
        )
        values = engine.log_growth_batch(
            mats, cum_rows, cum_init, model_of, z0, seeds, sim.steps, sim.burn_in
        ).reshape(g, n)
        mean[start:stop] = values.mean(axis=1)
        se[start:stop] = values.std(axis=1, ddof=1) / math.sqrt(n) if n > 1 else 0.0
    return mean, se


# ---------------------------------------------------------------------------
# sweep results

@dataclass
class SweepResult:
    """Per-point bounds, winners and SGR estimates plus aggregate win shares."""

    grid: SweepGrid
    sim: SimParams
    params: dict
    bounds: dict
    log_sgr: np.ndarray
    std_error: np.ndarray
    winner_lower: np.ndarray  # index into LOWER_TABLE
    winner_upper: np.ndarray  # index into UPPER_TABLE
    tie_lower: np.ndarray
    tie_upper: np.ndarray
    best_lower: np.ndarray
    best_upper: np.ndarray
    variation: np.ndarray
    rel_err_lower: np.ndarray
    rel_err_upper: np.ndarray
    failures: int

    @property
    def n_points(self) -> int:
        return self.log_sgr.size

    def win_shares(self, table: str) -> dict:
        """Percentage of points each bound wins (ties broken by table order)."""
        names = LOWER_TABLE if table == "lower" else UPPER_TABLE
        idx = self.winner_lower if table == "lower" else self.winner_upper
        counts = np.bincount(idx, minlength=len(names))
        return {name: 100.0 * counts[k] / idx.size for k, name in enumerate(names)}

    def tie_share(self, table: str) -> float:
        ties = self.tie_lower if table == "lower" else self.tie_upper
        return 100.0 * float(ties.sum()) / ties.size

    def summary(self) -> dict:
        return {
            "points": int(self.n_points),
            "failures": int(self.failures),
            "sim": {
                "samples": self.sim.samples,
                "steps": self.sim.steps,
                "burn_in": self.sim.burn_in,
                "seed": self.sim.seed,
            },
            "lower_win_shares": self.win_shares("lower"),
            "upper_win_shares": self.win_shares("upper"),
            "lower_tie_share": self.tie_share("lower"),
            "upper_tie_share": self.tie_share("upper"),
        }


def sweep_winners(grid: SweepGrid, sim: SimParams) -> SweepResult:
    """Evaluate bounds and the simulated SGR at every grid point.

    Winners are decided among the five lower bounds and six upper bounds of
    the comparison tables; bounds within TIE_TOL of the best are flagged as
    tied, and the winner is the first tied name in table order.
    """
    params = grid.parameter_table()
    bounds = leslie2_iid_bound_table(params)

    lower_stack = np.stack([bounds[name] for name in LOWER_TABLE])
    upper_stack = np.stack([bounds[name] for name in UPPER_TABLE])
    best_lower = lower_stack.max(axis=0)
    best_upper = upper_stack.min(axis=0)
    near_lower = lower_stack >= best_lower - TIE_TOL
    near_upper = upper_stack <= best_upper + TIE_TOL
    winner_lower = near_lower.argmax(axis=0)  # first tied name in table order
    winner_upper = near_upper.argmax(axis=0)
    tie_lower = near_lower.sum(axis=0) > 1
    tie_upper = near_upper.sum(axis=0) > 1

    log_sgr, se = simulate_grid_sgr(params, sim)
    ok = np.isfinite(log_sgr)
    failures = int((~ok).sum())
    lam = np.where(ok, np.exp(log_sgr), np.nan)
    rel_err_lower = 100.0 * np.abs(lam - np.exp(best_lower)) / lam
    rel_err_upper = 100.0 * np.abs(lam - np.exp(best_upper)) / lam

    return SweepResult(
        grid=grid,
        sim=sim,
        params=params,
        bounds=bounds,
        log_sgr=log_sgr,
        std_error=se,
        winner_lower=winner_lower.astype(np.int8),
        winner_upper=winner_upper.astype(np.int8),
        tie_lower=tie_lower,
        tie_upper=tie_upper,
        best_lower=best_lower,
        best_upper=best_upper,
        variation=environmental_variation(params),
        rel_err_lower=rel_err_lower,
        rel_err_upper=rel_err_upper,
        failures=failures,
    )


@dataclass(frozen=True)
class ErrorBin:
    """Error statistics of the best bounds within one variation bin."""

    variation_lo: float
    variation_hi: float
    count: int
    mean_err_upper: float
    sd_err_upper: float
    mean_err_lower: float
    sd_err_lower: float


def bin_errors(result: SweepResult, n_bins: int) -> list[ErrorBin]:
    """Group per-point best-bound errors into equal-width variation bins."""
    if n_bins < 1:
        raise ValidationError(f"n_bins must be >= 1, got {n_bins}")
    edges = np.linspace(0.0, 100.0, n_bins + 1)
    ok = np.isfinite(result.log_sgr)
    which = np.clip(np.digitize(result.variation, edges) - 1, 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        mask = ok & (which == b)
        count = int(mask.sum())
        if count == 0:
            bins.append(ErrorBin(edges[b], edges[b + 1], 0, math.nan, math.nan, math.nan, math.nan))
            continue
        eu = result.rel_err_upper[mask]
        el = result.rel_err_lower[mask]
        bins.append(
            ErrorBin(
                float(edges[b]),
                float(edges[b + 1]),
                count,
                float(eu.mean()),
                float(eu.std(ddof=1)) if count > 1 else 0.0,
                float(el.mean()),
                float(el.std(ddof=1)) if count > 1 else 0.0,
            )
        )
    return bins


def error_vs_variation(grid: SweepGrid, sim: SimParams, n_bins: int) -> list[ErrorBin]:
    """Best-bound relative errors binned by environmental variation."""
    return bin_errors(sweep_winners(grid, sim), n_bins)


def delta_curves(spec: RichPoorSpec, deltas, sim: SimParams) -> dict:
    """Simulated SGR and all lower bounds along a fertility-reduction grid.

    The same base seed drives every delta (common random numbers), so the
    simulated curve varies smoothly in delta.
    """
    deltas = np.asarray(deltas, dtype=float)
    if np.any(deltas < 0) or np.any(deltas >= spec.F):
        raise ValidationError("all deltas must lie in [0, F)")
    out = {key: np.empty(deltas.size) for key in
           ("delta", "log_sgr", "std_error", "c_I", "c_II", "c_III", "c_IV", "c_V")}
    for k, d in enumerate(deltas):
        model = spec.model(float(d))
        report = all_bounds(model)
        est = estimate_sgr(model, sim)
        out["delta"][k] = d
        out["log_sgr"][k] = est.log_sgr_mean
        out["std_error"][k] = est.std_error
        for name in ("c_I", "c_II", "c_III", "c_IV", "c_V"):
            out[name][k] = report.lower[name]
    return out


# ---------------------------------------------------------------------------
# CSV emission (9 significant digits, fixed column order, '.' decimal point)

POINT_COLUMNS = (
    "point", "pi1", "f1", "F1", "s1", "f2", "F2", "s2",
    *BOUND_COLUMNS,
    "log_sgr", "std_error", "best_lower", "best_upper",
    "winner_lower", "winner_upper", "tie_lower", "tie_upper",
    "variation", "rel_err_lower", "rel_err_upper",
)


def _fmt(x: float) -> str:
    return "%.9g" % x


def write_points_csv(result: SweepResult, fh) -> None:
    """Stream the per-point table; reruns with equal inputs are byte-identical."""
    fh.write(",".join(POINT_COLUMNS) + "\n")
    p = result.params
    b = result.bounds
    for k in range(result.n_points):
        row = [
            str(k),
            _fmt(p["pi1"][k]), _fmt(p["f1"][k]), _fmt(p["F1"][k]), _fmt(p["s1"][k]),
            _fmt(p["f2"][k]), _fmt(p["F2"][k]), _fmt(p["s2"][k]),
        ]
        row += [_fmt(b[name][k]) for name in BOUND_COLUMNS]
        row += [
            _fmt(result.log_sgr[k]), _fmt(result.std_error[k]),
            _fmt(result.best_lower[k]), _fmt(result.best_upper[k]),
            LOWER_TABLE[result.winner_lower[k]], UPPER_TABLE[result.winner_upper[k]],
            str(int(result.tie_lower[k])), str(int(result.tie_upper[k])),
            _fmt(result.variation[k]), _fmt(result.rel_err_lower[k]), _fmt(result.rel_err_upper[k]),
        ]
        fh.write(",".join(row) + "\n")


def write_error_bins_csv(bins: list[ErrorBin], fh) -> None:
    fh.write("variation_lo,variation_hi,count,mean_err_upper,sd_err_upper,"
             "mean_err_lower,sd_err_lower\n")
    for b in bins:
        fh.write(
            f"{_fmt(b.variation_lo)},{_fmt(b.variation_hi)},{b.count},"
            f"{_fmt(b.mean_err_upper)},{_fmt(b.sd_err_upper)},"
            f"{_fmt(b.mean_err_lower)},{_fmt(b.sd_err_lower)}\n"
        )


def write_delta_curves_csv(curves: dict, fh) -> None:
    names = ("delta", "log_sgr", "std_error", "c_I", "c_II", "c_III", "c_IV", "c_V")
    fh.write(",".join(names) + "\n")
    for k in range(curves["delta"].size):
        fh.write(",".join(_fmt(curves[name][k]) for name in names) + "\n")
