from . import attribution, calibration, dataset, learners, report, risk, simgen, synthesizer, uncertainty
from ._core import ConfigurationError, DataError, RapidError, __version__
from .attribution import AttributionModel, StratifiedRisk, fit_attribution, stratify_risk
from .calibration import ThresholdCurve, permutation_null_threshold, threshold_curve
from .dataset import Dataset, FoldAssignment, Schema, load_csv, permute_column, split_folds, write_csv
from .dtypes import Categorical, Continuous
from .interfaces import RapidSettings, load_settings
from .learners import AttackerSpec, TrainedAttacker, predict_proba, predict_value, train
from .report import AssessmentReport, render_summary
from .risk import (
    RapidResult,
    aggregate_multi_model,
    normalized_gain,
    prediction_error,
    rapid_assess,
    rapid_categorical,
    rapid_continuous,
)
from .simgen import SimConfig, generate, kappa_sweep, signal_noise_weights
from .synthesizer import rapid_synthesizer_cv, synthesize_cart
from .uncertainty import bootstrap_ci, clopper_pearson_interval, wilson_interval

__all__ = [
    "__version__",
    "attribution",
    "calibration",
    "dataset",
    "learners",
    "report",
    "risk",
    "simgen",
    "synthesizer",
    "uncertainty",
    "RapidError",
    "ConfigurationError",
    "DataError",
    "Categorical",
    "Continuous",
    "Schema",
    "Dataset",
    "FoldAssignment",
    "load_csv",
    "write_csv",
    "split_folds",
    "permute_column",
    "RapidSettings",
    "load_settings",
    "AttackerSpec",
    "TrainedAttacker",
    "train",
    "predict_proba",
    "predict_value",
    "RapidResult",
    "normalized_gain",
    "prediction_error",
    "rapid_categorical",
    "rapid_continuous",
    "rapid_assess",
    "aggregate_multi_model",
    "bootstrap_ci",
    "wilson_interval",
    "clopper_pearson_interval",
    "ThresholdCurve",
    "threshold_curve",
    "permutation_null_threshold",
    "synthesize_cart",
    "rapid_synthesizer_cv",
    "SimConfig",
    "signal_noise_weights",
    "generate",
    "kappa_sweep",
    "StratifiedRisk",
    "AttributionModel",
    "stratify_risk",
    "fit_attribution",
    "AssessmentReport",
    "render_summary",
]
