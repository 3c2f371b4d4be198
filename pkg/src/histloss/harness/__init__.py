"""Training loop, baselines and experiment drivers."""

from .experiments import (
    BaselineResult,
    ReprResult,
    SweepPoint,
    iqr,
    median_normalize,
    ols_fit,
    ols_predict,
    representation_experiment,
    run_ols,
    sweep,
    sweep_table,
)
from .gradcheck import GradcheckReport, gradcheck_suite, prop1_measure
from .presets import DESK_SEEDS, PRESETS, preset_config
from .training import (
    HISTORY_COLUMNS,
    EpochRecord,
    Metrics,
    RunConfig,
    RunHistory,
    SplitData,
    TrainingError,
    build_loss,
    derive_seeds,
    error_metrics,
    evaluate,
    grad_norm_last_layer,
    prepare,
    train,
    write_json,
)

__all__ = [
    "BaselineResult",
    "DESK_SEEDS",
    "EpochRecord",
    "HISTORY_COLUMNS",
    "GradcheckReport",
    "Metrics",
    "PRESETS",
    "ReprResult",
    "RunConfig",
    "RunHistory",
    "SplitData",
    "SweepPoint",
    "TrainingError",
    "build_loss",
    "derive_seeds",
    "error_metrics",
    "evaluate",
    "grad_norm_last_layer",
    "gradcheck_suite",
    "iqr",
    "median_normalize",
    "ols_fit",
    "ols_predict",
    "prepare",
    "preset_config",
    "prop1_measure",
    "representation_experiment",
    "run_ols",
    "sweep",
    "sweep_table",
    "train",
    "write_json",
]
