"""Command-line interface.

Exit codes: 0 on success, 2 on validation errors (bad flags, malformed
models, broken preconditions), 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bounds import all_bounds
from .errors import NumericalError, SgrLabError, ValidationError
from .estimate import SimParams, estimate_sgr
from .extinction import RichPoorSpec, analyze_delta, classify
from .models import leslie2_params, load_model
from .spectral import check_ergodic_set
from .sweep import (
    SweepGrid,
    bin_errors,
    delta_curves,
    sweep_winners,
    write_delta_curves_csv,
    write_error_bins_csv,
    write_points_csv,
)

# the three built-in rich/poor example configurations
DELTA_CASES = {
    "A": dict(f=0.55, F=1.35, s=0.45, pi1=0.5),
    "B": dict(f=0.5, F=1.3, s=0.5, pi1=0.9),
    "C": dict(f=0.7, F=1.1, s=0.4, pi1=0.5),
}


def _add_model_flag(p):
    p.add_argument("--model", required=True, help="model JSON file")


def _add_sim_flags(p, samples=500, steps=600):
    p.add_argument("--samples", type=int, default=samples, help="number of trajectories")
    p.add_argument("--steps", type=int, default=steps, help="steps per trajectory")
    p.add_argument("--burn-in", type=int, default=100, help="discarded initial steps")
    p.add_argument("--seed", type=int, default=1, help="base seed")


def _add_output_flags(p, formats=("json", "csv")):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=formats, default=formats[0])


def _sim_params(args) -> SimParams:
    return SimParams(args.samples, args.steps, args.burn_in, args.seed)


def _open_out(args):
    if args.out:
        return open(args.out, "w", encoding="utf-8", newline="")
    return None


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _kv_csv(pairs) -> str:
    lines = ["name,value"]
    for k, v in pairs:
        lines.append(f"{k},{v}")
    return "\n".join(lines) + "\n"


def _jsonable_pairs(doc, prefix=""):
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _jsonable_pairs(v, prefix=f"{key}.")
        elif isinstance(v, list):
            yield key, ";".join(str(x) for x in v)
        else:
            yield key, v


def _render(args, doc: dict) -> None:
    if args.format == "json":
        _emit(args, json.dumps(doc, indent=2) + "\n")
    else:
        _emit(args, _kv_csv(_jsonable_pairs(doc)))


def _cmd_sgr(args) -> int:
    model = load_model(args.model)
    est = estimate_sgr(model, _sim_params(args))
    doc = {
        "log_sgr_mean": est.log_sgr_mean,
        "std_error": est.std_error,
        "samples": est.samples,
        "steps": est.steps,
        "burn_in": est.burn_in,
        "seed": est.seed,
    }
    _render(args, doc)
    return 0


def _cmd_bounds(args) -> int:
    model = load_model(args.model)
    report = all_bounds(model, support_only=args.support_only)
    _render(args, report.to_jsonable())
    return 0


def _cmd_delta(args) -> int:
    spec = RichPoorSpec(f=args.f, F=args.F, s=args.s, pi1=args.pi1)
    sim = _sim_params(args) if args.simulate else None
    analysis = analyze_delta(spec, tol=args.tol, sim=sim)
    _render(args, analysis.to_jsonable())
    return 0


def _cmd_classify(args) -> int:
    model = load_model(args.model)
    report = all_bounds(model, support_only=args.support_only)
    est = estimate_sgr(model, _sim_params(args)) if args.simulate else None
    verdict = classify(model, report, sgr=est)
    _render(args, verdict.to_jsonable())
    return 0


def _cmd_analyze(args) -> int:
    model = load_model(args.model)
    ergo = check_ergodic_set(model.envs)
    report = all_bounds(model, support_only=args.support_only)
    est = estimate_sgr(model, _sim_params(args)) if args.simulate else None
    verdict = classify(model, report, sgr=est)
    doc = {
        "model": {
            "n": model.n,
            "environments": model.r,
            "chain": model.chain.kind,
            "leslie2": leslie2_params(model.envs) is not None,
        },
        "ergodic_set": {
            "ergodic": ergo.ergodic,
            "g": ergo.g,
            "inconclusive": ergo.inconclusive,
        },
        "bounds": report.to_jsonable(),
        "classification": verdict.to_jsonable(),
    }
    if est is not None:
        doc["sgr"] = {
            "log_sgr_mean": est.log_sgr_mean,
            "std_error": est.std_error,
            "samples": est.samples,
            "steps": est.steps,
            "burn_in": est.burn_in,
            "seed": est.seed,
        }
    _render(args, doc)
    return 0


def _grid_from_args(args) -> SweepGrid:
    return SweepGrid(
        pi1_values=tuple(args.pi1),
        f_range=tuple(args.f_range),
        F_range=tuple(args.F_range),
        s_range=tuple(args.s_range),
        step=args.step,
    )


def _cmd_sweep(args) -> int:
    result = sweep_winners(_grid_from_args(args), _sim_params(args))
    fh = _open_out(args)
    try:
        write_points_csv(result, fh if fh is not None else sys.stdout)
    finally:
        if fh is not None:
            fh.close()
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as sh:
            json.dump(result.summary(), sh, indent=2)
            sh.write("\n")
    return 0


def _cmd_error_curve(args) -> int:
    result = sweep_winners(_grid_from_args(args), _sim_params(args))
    bins = bin_errors(result, args.bins)
    fh = _open_out(args)
    try:
        write_error_bins_csv(bins, fh if fh is not None else sys.stdout)
    finally:
        if fh is not None:
            fh.close()
    return 0


def _cmd_delta_curves(args) -> int:
    if args.case:
        spec = RichPoorSpec(**DELTA_CASES[args.case])
    else:
        missing = [k for k in ("f", "F", "s", "pi1") if getattr(args, k) is None]
        if missing:
            raise ValidationError(
                f"either --case or all of --f/--F/--s/--pi1 are required (missing {missing})"
            )
        spec = RichPoorSpec(f=args.f, F=args.F, s=args.s, pi1=args.pi1)
    delta_max = args.delta_max if args.delta_max is not None else 0.95 * spec.F
    if not 0 < delta_max < spec.F:
        raise ValidationError(f"--delta-max must lie in (0, F), got {delta_max}")
    deltas = np.arange(0.0, delta_max + args.delta_step / 2, args.delta_step)
    curves = delta_curves(spec, deltas, _sim_params(args))
    fh = _open_out(args)
    try:
        write_delta_curves_csv(curves, fh if fh is not None else sys.stdout)
    finally:
        if fh is not None:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgrlab",
        description=(
            "Stochastic growth rates of matrix population models under random "
            "environments: Monte-Carlo estimation, closed-form bounds, and "
            "growth/extinction analysis."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sgr", help="Monte-Carlo estimate of the log stochastic growth rate")
    _add_model_flag(p)
    _add_sim_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_sgr)

    p = sub.add_parser("bounds", help="all closed-form bounds for one model")
    _add_model_flag(p)
    p.add_argument("--support-only", action="store_true",
                   help="tighter perturbation extrema over support entries only")
    _add_output_flags(p)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("delta", help="fertility-reduction thresholds for a rich/poor model")
    p.add_argument("--f", type=float, required=True, help="juvenile fertility")
    p.add_argument("--F", type=float, required=True, help="adult fertility (rich environment)")
    p.add_argument("--s", type=float, required=True, help="juvenile survival")
    p.add_argument("--pi1", type=float, required=True, help="probability of the rich environment")
    p.add_argument("--tol", type=float, default=1e-9, help="bisection tolerance")
    p.add_argument("--simulate", action="store_true", help="also locate the simulated-SGR root")
    _add_sim_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_delta)

    p = sub.add_parser("classify", help="growth/extinction verdict from certified bounds")
    _add_model_flag(p)
    p.add_argument("--support-only", action="store_true")
    p.add_argument("--simulate", action="store_true", help="annotate with an SGR estimate")
    _add_sim_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("analyze", help="model summary, ergodicity, bounds and classification")
    _add_model_flag(p)
    p.add_argument("--support-only", action="store_true")
    p.add_argument("--simulate", action="store_true")
    _add_sim_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_analyze)

    def add_grid_flags(p):
        p.add_argument("--pi1", type=float, nargs="+", default=[0.1, 0.5, 0.9],
                       help="environment-1 probabilities")
        p.add_argument("--f-range", type=float, nargs=2, default=[0.1, 3.0], metavar=("LO", "HI"))
        p.add_argument("--F-range", type=float, nargs=2, default=[0.1, 5.0], metavar=("LO", "HI"))
        p.add_argument("--s-range", type=float, nargs=2, default=[0.1, 0.9], metavar=("LO", "HI"))
        p.add_argument("--step", type=float, default=0.4, help="grid spacing")

    p = sub.add_parser("sweep", help="winner statistics for bounds over a parameter grid")
    add_grid_flags(p)
    _add_sim_flags(p, samples=200, steps=300)
    p.add_argument("--out", help="per-point CSV output file (default: stdout)")
    p.add_argument("--summary", help="aggregate win-share JSON output file")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("error-curve", help="best-bound errors binned by environmental variation")
    add_grid_flags(p)
    _add_sim_flags(p, samples=200, steps=300)
    p.add_argument("--bins", type=int, default=10, help="number of variation bins")
    p.add_argument("--out", help="CSV output file (default: stdout)")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.set_defaults(func=_cmd_error_curve)

    p = sub.add_parser("delta-curves", help="lower bounds and simulated SGR vs fertility reduction")
    p.add_argument("--case", choices=sorted(DELTA_CASES), help="built-in example configuration")
    p.add_argument("--f", type=float)
    p.add_argument("--F", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--pi1", type=float)
    p.add_argument("--delta-max", type=float, help="largest fertility reduction (default 0.95 F)")
    p.add_argument("--delta-step", type=float, default=0.05)
    _add_sim_flags(p)
    p.add_argument("--out", help="CSV output file (default: stdout)")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.set_defaults(func=_cmd_delta_curves)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"sgrlab: validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"sgrlab: numerical failure: {exc}", file=sys.stderr)
        return 3
    except SgrLabError as exc:  # pragma: no cover - safety net
        print(f"sgrlab: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
