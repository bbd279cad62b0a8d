"""Treatment effect estimation for right-censored outcomes.

Propensity scores are fitted by penalized empirical likelihood so that the
chosen covariates are balanced across arms and the censoring-adjusted
weights are calibrated. Baseline estimators (plain inverse probability
weighting, unpenalized balancing, augmented IPW) and a simulation harness
are included for comparison studies.
"""

from .baselines import (
    BaselineSpec,
    fit_aipw,
    fit_cbps_unpenalized,
    fit_naive_ipw,
    run_baseline,
)
from .censoring import CensorSurvival, fit_censoring_km
from .data import Dataset, ObservedRecord, SummaryStats, parse_csv, summarize, write_csv
from .errors import (
    ConfigError,
    DegenerateArmError,
    DumpFormatError,
    FitError,
    InputError,
    RowParseError,
    SchemaError,
    SelectionError,
    SingularMatrixError,
    SurvCbpsError,
)
from .inference import (
    ATEResult,
    ate_with_ci,
    ipcw_ipw_means,
    normalized_weights,
    weighted_median,
)
from .moments import GValue, PropensityParams, g_value, jacobian_g, propensity, stack_g
from .scad import ScadParams, lqa_weight, scad_derivative, scad_value
from .simulation import (
    SimConfig,
    SimReport,
    generate_dataset,
    load_config,
    run_study,
    true_ate,
    write_outputs,
)
from .solver import (
    FitOptions,
    PELFit,
    default_tau_grid,
    el_weights,
    fit_pel,
    pel_objective,
    select_tau,
    solve_inner_dual,
)

__version__ = "0.1.0"

__all__ = [
    "ATEResult",
    "BaselineSpec",
    "CensorSurvival",
    "ConfigError",
    "Dataset",
    "DegenerateArmError",
    "DumpFormatError",
    "FitError",
    "FitOptions",
    "GValue",
    "InputError",
    "ObservedRecord",
    "PELFit",
    "PropensityParams",
    "RowParseError",
    "ScadParams",
    "SchemaError",
    "SelectionError",
    "SimConfig",
    "SimReport",
    "SingularMatrixError",
    "SummaryStats",
    "SurvCbpsError",
    "ate_with_ci",
    "default_tau_grid",
    "el_weights",
    "fit_aipw",
    "fit_cbps_unpenalized",
    "fit_naive_ipw",
    "fit_pel",
    "fit_censoring_km",
    "g_value",
    "generate_dataset",
    "ipcw_ipw_means",
    "jacobian_g",
    "load_config",
    "lqa_weight",
    "normalized_weights",
    "parse_csv",
    "pel_objective",
    "propensity",
    "run_baseline",
    "run_study",
    "scad_derivative",
    "scad_value",
    "select_tau",
    "solve_inner_dual",
    "stack_g",
    "summarize",
    "true_ate",
    "weighted_median",
    "write_csv",
    "write_outputs",
]
