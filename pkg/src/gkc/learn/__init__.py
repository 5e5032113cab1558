"""Classifiers and ranking metrics."""
from .logreg import NonFiniteError
from .metrics import NoPositiveError, SingleClassError, auc_prc, auc_roc
from .models import (
    DEFAULTS,
    DimensionMismatchError,
    HyperparameterError,
    ModelKind,
    ModelSpec,
    TrainedModel,
    load_model,
    model_from_json,
    model_to_json,
    predict_scores,
    save_model,
    train,
    train_gbt,
    train_logreg_en,
    train_rf,
)

__all__ = [
    "DEFAULTS", "DimensionMismatchError", "HyperparameterError", "ModelKind", "ModelSpec",
    "NoPositiveError", "NonFiniteError", "SingleClassError", "TrainedModel", "auc_prc",
    "auc_roc", "load_model", "model_from_json", "model_to_json", "predict_scores",
    "save_model", "train", "train_gbt", "train_logreg_en", "train_rf",
]
