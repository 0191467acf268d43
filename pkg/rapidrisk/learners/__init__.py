from ._logistic import ConvergenceWarning
from .attacker import (
    CART,
    FAMILIES,
    FAMILY_ALIASES,
    LOGISTIC_L1,
    RANDOM_FOREST,
    AttackerSpec,
    DegenerateTarget,
    EmptyTraining,
    TrainedAttacker,
    UnknownFamily,
    UnsupportedTarget,
    load_model,
    predict_class,
    predict_proba,
    predict_value,
    save_model,
    train,
)

__all__ = [
    "CART",
    "FAMILIES",
    "FAMILY_ALIASES",
    "LOGISTIC_L1",
    "RANDOM_FOREST",
    "AttackerSpec",
    "ConvergenceWarning",
    "DegenerateTarget",
    "EmptyTraining",
    "TrainedAttacker",
    "UnknownFamily",
    "UnsupportedTarget",
    "load_model",
    "predict_class",
    "predict_proba",
    "predict_value",
    "save_model",
    "train",
]
