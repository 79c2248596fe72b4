"""Selection-model adjustment for outcome reporting bias in random-effects meta-analysis."""

from .adjusted import (
    AdjustedModel,
    fit_orb_adjusted,
    impute_missing_variance,
    orb_adjusted_loglik,
    reported_weight_term,
    unreported_term,
)
from .core import (
    CIError,
    FitResult,
    MetaAnalysis,
    Params,
    Study,
    fit_naive,
    log_rr_from_counts,
    naive_loglik,
    profile_ci,
)
from .dataio import DataError, parse_dataset, serialize_dataset
from .selection import (
    SelectionSpec,
    eval_weight,
    p_value,
    parse_spec,
    weight_as_function_of_y,
)
from .simulate import (
    PerfRow,
    ScenarioConfig,
    SimulationError,
    aggregate,
    apply_orb,
    draw_orb_dataset,
    generate_meta,
    i2_to_tau2,
    run_grid,
    run_replication,
)

__version__ = "0.1.0"

__all__ = [
    "AdjustedModel",
    "CIError",
    "DataError",
    "FitResult",
    "MetaAnalysis",
    "Params",
    "PerfRow",
    "ScenarioConfig",
    "SelectionSpec",
    "SimulationError",
    "Study",
    "parse_dataset",
    "serialize_dataset",
    "aggregate",
    "apply_orb",
    "draw_orb_dataset",
    "eval_weight",
    "fit_naive",
    "fit_orb_adjusted",
    "generate_meta",
    "i2_to_tau2",
    "impute_missing_variance",
    "log_rr_from_counts",
    "naive_loglik",
    "orb_adjusted_loglik",
    "p_value",
    "parse_spec",
    "profile_ci",
    "reported_weight_term",
    "run_grid",
    "run_replication",
    "unreported_term",
    "weight_as_function_of_y",
]
