"""sgrlab: stochastic growth rates of matrix population models.

Estimate the stochastic growth rate of a stage-structured population in a
randomly switching environment, bracket it with closed-form bounds, and turn
the bounds into sufficient conditions for growth or extinction.
"""

from .bounds import (
    BoundsReport,
    PerturbationProfile,
    StructureBand,
    all_bounds,
    cohen_bounds,
    column_sums,
    general_perturbation_relation,
    leslie2_structure_band,
    maxmin_bounds,
    perturbation_bounds,
    perturbation_profile,
    reference_bounds,
    structure_informed_bounds,
)
from .errors import NumericalError, SgrLabError, UnsupportedModelError, ValidationError
from .estimate import (
    SgrEstimate,
    SimParams,
    estimate_sgr,
    exact_mean_norm,
    mean_growth_rate,
    mean_population_operator,
    simulate_log_growth,
    simulate_structure_range,
    tuljapurkar_approx,
)
from .extinction import (
    Classification,
    DeltaAnalysis,
    RichPoorSpec,
    analyze_delta,
    classify,
    delta_threshold_closed,
    delta_threshold_numeric,
)
from .models import (
    EnvironmentChain,
    EnvironmentSet,
    Leslie2Params,
    ModelSpec,
    leslie2_params,
    load_model,
    model_from_dict,
    model_to_dict,
)
from .spectral import (
    ErgodicityResult,
    check_ergodic_set,
    mean_matrix,
    net_reproductive_value,
    spectral_radius,
    stationary_distribution,
)
from .sweep import (
    ErrorBin,
    SweepGrid,
    SweepResult,
    bin_errors,
    delta_curves,
    error_vs_variation,
    leslie2_iid_bound_table,
    sweep_winners,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsReport",
    "Classification",
    "DeltaAnalysis",
    "EnvironmentChain",
    "EnvironmentSet",
    "ErgodicityResult",
    "ErrorBin",
    "Leslie2Params",
    "ModelSpec",
    "NumericalError",
    "PerturbationProfile",
    "RichPoorSpec",
    "SgrEstimate",
    "SgrLabError",
    "SimParams",
    "StructureBand",
    "SweepGrid",
    "SweepResult",
    "UnsupportedModelError",
    "ValidationError",
    "all_bounds",
    "analyze_delta",
    "bin_errors",
    "check_ergodic_set",
    "classify",
    "cohen_bounds",
    "column_sums",
    "delta_curves",
    "delta_threshold_closed",
    "delta_threshold_numeric",
    "error_vs_variation",
    "estimate_sgr",
    "exact_mean_norm",
    "general_perturbation_relation",
    "leslie2_iid_bound_table",
    "leslie2_params",
    "leslie2_structure_band",
    "load_model",
    "maxmin_bounds",
    "mean_growth_rate",
    "mean_matrix",
    "mean_population_operator",
    "model_from_dict",
    "model_to_dict",
    "net_reproductive_value",
    "perturbation_bounds",
    "perturbation_profile",
    "reference_bounds",
    "simulate_log_growth",
    "simulate_structure_range",
    "spectral_radius",
    "stationary_distribution",
    "structure_informed_bounds",
    "sweep_winners",
    "tuljapurkar_approx",
]
