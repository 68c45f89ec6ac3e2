"""Uncertainty for regression networks via test-time dropout.

Train a deterministic MLP, switch dropout on only at inference to get a
predictive mean and variance per instance, then repair the variance scale:
analytically (the closed-form NLL-minimizing multiplier) or by bisecting the
calibration balance to zero. A tuner picks the dropout rate on validation
data and an experiment harness runs the whole protocol with repeats.
"""

from ._kernels import backend
from .data import Dataset, Standardizer, fold_standardizer, load_csv
from .errors import (
    ComputationError,
    ConvergenceError,
    EmptyDataError,
    InputShapeError,
    NoBracketError,
    ParseError,
    TrainingDivergedError,
    ValidationError,
)
from .harness import (
    ExperimentReport,
    RepeatResult,
    SplitPlan,
    TestMetrics,
    export_report,
    load_report,
    run_experiment,
    split_indices,
)
from .mc import (
    DEFAULT_PASSES,
    McEstimate,
    mc_predict,
    read_predictions_csv,
    write_predictions_csv,
)
from .metrics import (
    DEFAULT_ALPHA_POINTS,
    VARIANCE_FLOOR,
    CalibrationCurve,
    alpha_grid,
    balance,
    calibration_curve,
    floor_diagnostics,
    floor_variances,
    gaussian_nll,
    metrics_summary,
    miscalibration_area,
    observed_frequency,
    read_curve_csv,
    rmse,
    write_curve_csv,
    z_quantile,
)
from .nn import (
    ACTIVATIONS,
    DropoutConfig,
    DropoutMask,
    MlpModel,
    TrainConfig,
    forward,
    forward_batch,
    forward_dropout,
    init_model,
    load_model,
    resolve_placement,
    sample_mask,
    save_model,
    train,
)
from .scaling import (
    DEFAULT_TOLERANCE,
    RelaxationResult,
    ScaleResult,
    apply_scale,
    balance_at_scale,
    bracket_scale,
    ideal_uncertainty,
    optimal_scale,
    relax_scale,
)
from .seeds import derive_seed
from .tuner import (
    DEFAULT_GRID,
    EmbeddedSpec,
    MethodSweep,
    RateEvaluation,
    RateGrid,
    SweepReport,
    rate_seed,
    sweep,
    tune_scaled,
    tune_unscaled,
    write_sweep_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "CalibrationCurve",
    "ComputationError",
    "ConvergenceError",
    "DEFAULT_ALPHA_POINTS",
    "DEFAULT_GRID",
    "DEFAULT_PASSES",
    "DEFAULT_TOLERANCE",
    "Dataset",
    "DropoutConfig",
    "DropoutMask",
    "EmbeddedSpec",
    "EmptyDataError",
    "ExperimentReport",
    "InputShapeError",
    "McEstimate",
    "MethodSweep",
    "MlpModel",
    "NoBracketError",
    "ParseError",
    "RateEvaluation",
    "RateGrid",
    "RelaxationResult",
    "RepeatResult",
    "ScaleResult",
    "SplitPlan",
    "Standardizer",
    "SweepReport",
    "TestMetrics",
    "TrainConfig",
    "TrainingDivergedError",
    "VARIANCE_FLOOR",
    "ValidationError",
    "alpha_grid",
    "apply_scale",
    "backend",
    "balance",
    "balance_at_scale",
    "bracket_scale",
    "calibration_curve",
    "derive_seed",
    "export_report",
    "floor_diagnostics",
    "floor_variances",
    "fold_standardizer",
    "forward",
    "forward_batch",
    "forward_dropout",
    "gaussian_nll",
    "ideal_uncertainty",
    "init_model",
    "load_csv",
    "load_model",
    "load_report",
    "mc_predict",
    "metrics_summary",
    "miscalibration_area",
    "observed_frequency",
    "optimal_scale",
    "rate_seed",
    "read_curve_csv",
    "read_predictions_csv",
    "relax_scale",
    "resolve_placement",
    "rmse",
    "run_experiment",
    "sample_mask",
    "save_model",
    "split_indices",
    "sweep",
    "train",
    "tune_scaled",
    "tune_unscaled",
    "write_curve_csv",
    "write_predictions_csv",
    "write_sweep_csv",
    "z_quantile",
]
