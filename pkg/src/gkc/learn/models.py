"""Model specifications, training dispatch, prediction and serialization."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import trees
from .logreg import NonFiniteError, fit_logreg_en
from .metrics import SingleClassError

FORMAT = "gkc-model"
FORMAT_VERSION = 1


class ModelKind(str, enum.Enum):
    LOGREG_EN = "LogRegEN"
    RANDOM_FOREST = "RandomForest"
    GRAD_BOOST = "GradBoost"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        for k in cls:
            if str(value).lower() in (k.value.lower(), k.name.lower()):
                return k
        raise ValueError(f"unknown model kind {value!r}")


class DimensionMismatchError(ValueError):
    pass


class HyperparameterError(ValueError):
    pass


DEFAULTS: dict[ModelKind, dict[str, Any]] = {
    ModelKind.LOGREG_EN: {"lambda": 0.01, "alpha": 0.5, "max_iter": 1000, "tol": 1e-6},
    ModelKind.RANDOM_FOREST: {"n_trees": 200, "max_depth": 8, "feature_fraction": None,
                              "min_leaf": 1, "bootstrap": True},
    ModelKind.GRAD_BOOST: {"n_rounds": 100, "learning_rate": 0.1, "max_depth": 3,
                           "l2_leaf_reg": 1.0, "min_child_weight": 1.0},
}


def _check_range(kind, hp):
    def need(ok, msg):
        if not ok:
            raise HyperparameterError(f"{kind.value}: {msg}")
    if kind is ModelKind.LOGREG_EN:
        need(hp["lambda"] >= 0, "lambda must be >= 0")
        need(0.0 <= hp["alpha"] <= 1.0, "alpha must lie in [0, 1]")
        need(hp["max_iter"] >= 1, "max_iter must be >= 1")
        need(hp["tol"] > 0, "tol must be > 0")
    elif kind is ModelKind.RANDOM_FOREST:
        need(hp["n_trees"] >= 1, "n_trees must be >= 1")
        need(hp["max_depth"] >= 0, "max_depth must be >= 0")
        ff = hp["feature_fraction"]
        need(ff is None or 0.0 < ff <= 1.0, "feature_fraction must lie in (0, 1]")
        need(hp["min_leaf"] >= 1, "min_leaf must be >= 1")
    else:
        need(hp["n_rounds"] >= 0, "n_rounds must be >= 0")
        need(hp["learning_rate"] >= 0, "learning_rate must be >= 0")
        need(1 <= hp["max_depth"] <= 12, "max_depth must lie in [1, 12]")
        need(hp["l2_leaf_reg"] >= 0 and not math.isnan(hp["l2_leaf_reg"]),
             "l2_leaf_reg must be >= 0")
        need(hp["min_child_weight"] >= 0, "min_child_weight must be >= 0")


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        kind = ModelKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        unknown = set(self.hyperparams) - set(DEFAULTS[kind])
        if unknown:
            raise HyperparameterError(f"{kind.value}: unknown hyperparameters {sorted(unknown)}")
        hp = {**DEFAULTS[kind], **self.hyperparams}
        _check_range(kind, hp)
        object.__setattr__(self, "hyperparams", hp)
        if not 0 <= int(self.seed) < 2 ** 64:
            raise HyperparameterError("seed must be a 64-bit unsigned integer")

    def with_params(self, **kw) -> "ModelSpec":
        return ModelSpec(self.kind, {**self.hyperparams, **kw}, self.seed)


@dataclass
class TrainedModel:
    kind: ModelKind
    spec: ModelSpec
    n_features: int
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def margin(self, X, n_rounds=None):
        X = _check_width(self, X)
        if self.kind is ModelKind.LOGREG_EN:
            p = self.params
            return ((X - p["mean"]) / p["scale"]) @ p["weights"] + float(p["intercept"][0])
        if self.kind is ModelKind.GRAD_BOOST:
            p = self.params
            return trees.boosted_margin(X, float(p["base"][0]), p["feat"], p["thr"], p["val"],
                                        n_rounds)
        raise TypeError("random forests have no additive margin")

    def staged_scores(self, X, stages):
        """GradBoost scores after each round count in ``stages``."""
        if self.kind is not ModelKind.GRAD_BOOST:
            raise TypeError("staged prediction is defined for GradBoost only")
        X = _check_width(self, X)
        p = self.params
        m = trees.boosted_margin_staged(X, float(p["base"][0]), p["feat"], p["thr"],
                                        p["val"], stages)
        return _sigmoid(m)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z)))


def _check_width(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatchError(f"model expects {model.n_features} columns, got "
                                     f"{X.shape[1] if X.ndim == 2 else X.shape}")
    return X


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DimensionMismatchError("X must be 2-D with one row per label")
    if X.shape[0] < 2:
        raise SingleClassError("need at least two rows")
    if not np.all(np.isfinite(X)):
        raise NonFiniteError("X contains non-finite values")
    if len(np.unique(y)) < 2:
        raise SingleClassError("training labels contain a single class")
    return X, y.astype(np.float64)


def train_logreg_en(X, y, spec: ModelSpec) -> TrainedModel:
    X, y = _check_xy(X, y)
    hp = spec.hyperparams
    fit = fit_logreg_en(X, y, lam=hp["lambda"], alpha=hp["alpha"], max_iter=hp["max_iter"],
                        tol=hp["tol"])
    params = {"weights": fit.weights, "intercept": np.array([fit.intercept]),
              "mean": fit.mean, "scale": fit.scale}
    meta = {"iterations": fit.n_iter, "final_objective": fit.objective,
            "converged": fit.converged}
    return TrainedModel(spec.kind, spec, X.shape[1], params, meta)


def train_gbt(X, y, spec: ModelSpec) -> TrainedModel:
    X, y = _check_xy(X, y)
    hp = spec.hyperparams
    base, feat, thr, val = trees.fit_boosted(X, y, hp["n_rounds"], hp["learning_rate"],
                                             hp["max_depth"], hp["l2_leaf_reg"],
                                             hp["min_child_weight"])
    params = {"base": np.array([base]), "feat": feat, "thr": thr, "val": val}
    return TrainedModel(spec.kind, spec, X.shape[1], params, {"rounds": int(hp["n_rounds"])})


def train_rf(X, y, spec: ModelSpec) -> TrainedModel:
    X, y = _check_xy(X, y)
    hp = spec.hyperparams
    feat, thr, left, right, val, oob = trees.fit_forest(
        X, y, hp["n_trees"], hp["max_depth"], hp["feature_fraction"], hp["min_leaf"],
        int(spec.seed), bool(hp["bootstrap"]))
    params = {"feat": feat, "thr": thr, "left": left, "right": right, "val": val, "oob": oob}
    return TrainedModel(spec.kind, spec, X.shape[1], params, {"trees": int(hp["n_trees"])})


TRAINERS = {ModelKind.LOGREG_EN: train_logreg_en, ModelKind.GRAD_BOOST: train_gbt,
            ModelKind.RANDOM_FOREST: train_rf}


def train(X, y, spec: ModelSpec) -> TrainedModel:
    return TRAINERS[spec.kind](X, y, spec)


def predict_scores(model: TrainedModel, X) -> np.ndarray:
    """Probability of label 1 for each row of ``X``."""
    if model.kind is ModelKind.RANDOM_FOREST:
        X = _check_width(model, X)
        p = model.params
        return trees.forest_predict(X, p["feat"], p["thr"], p["left"], p["right"], p["val"])
    return _sigmoid(model.margin(X))


# ---------------------------------------------------------------- serialization

def _encode_array(a: np.ndarray) -> dict:
    a = np.asarray(a)
    return {"dtype": a.dtype.str, "shape": list(a.shape), "data": a.ravel().tolist()}


def _decode_array(d: dict) -> np.ndarray:
    return np.asarray(d["data"], dtype=np.dtype(d["dtype"])).reshape(d["shape"])


def model_to_json(model: TrainedModel) -> str:
    """Self-describing JSON: a header object followed by named arrays.

    Floats are written with Python's shortest round-trip repr, so reloading
    reproduces every parameter bit for bit.
    """
    doc = {
        "header": {"format": FORMAT, "version": FORMAT_VERSION, "kind": model.kind.value,
                   "n_features": model.n_features, "seed": int(model.spec.seed),
                   "hyperparams": model.spec.hyperparams, "meta": model.meta},
        "params": {k: _encode_array(v) for k, v in sorted(model.params.items())},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def model_from_json(text: str) -> TrainedModel:
    doc = json.loads(text)
    head = doc["header"]
    if head.get("format") != FORMAT or head.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model file {head.get('format')} v{head.get('version')}")
    spec = ModelSpec(ModelKind.parse(head["kind"]), head["hyperparams"], head["seed"])
    params = {k: _decode_array(v) for k, v in doc["params"].items()}
    return TrainedModel(spec.kind, spec, head["n_features"], params, head["meta"])


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
