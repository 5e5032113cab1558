"""Modality attribution: grouped permutation importance and linear Shapley values."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..cohort import Modality
from ..embedding import GroupSpan
from ..learn import ModelKind, ModelSpec, TrainedModel, auc_roc, predict_scores, train
from .cv import PURPOSE_ATTRIBUTION, CvPlan, derive_seed

DEGENERATE_EPS = 1e-6


class DegenerateModelError(ValueError):
    """Baseline AUC at or below chance, so importance shares are undefined."""


@dataclass
class AttributionResult:
    shares: dict[Modality, float]            # percent, sums to 100
    drops: dict[Modality, float]             # mean AUC-ROC drop, clipped at 0
    baseline_auc: float
    n_permutations: int
    per_patient: np.ndarray | None = None    # (n_rows, n_groups) linear Shapley
    per_patient_groups: list[Modality] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "shares": {m.label: self.shares[m] for m in sorted(self.shares)},
            "drops": {m.label: self.drops[m] for m in sorted(self.drops)},
            "baseline_auc": self.baseline_auc,
            "n_permutations": self.n_permutations,
        }


def _check_spans(spans: Sequence[GroupSpan], width: int):
    cover = np.zeros(width, dtype=int)
    for s in spans:
        cover[s.start:s.stop] += 1
    if not np.all(cover == 1):
        raise ValueError("group spans must cover every column exactly once")


def permutation_drops(model: TrainedModel, X, y, spans: Sequence[GroupSpan], seed: int,
                      n_permutations: int = 20) -> tuple[float, dict[Modality, np.ndarray]]:
    """Baseline AUC and the per-permutation AUC drop for each group.

    Each permutation applies one row shuffle to all of a group's columns.
    The stream for a group is keyed by its modality, not its position, so the
    result does not depend on the order in which groups are listed.
    """
    X = np.asarray(X, dtype=np.float64)
    _check_spans(spans, X.shape[1])
    base = auc_roc(predict_scores(model, X), y)
    drops = {}
    for s in spans:
        rng = np.random.default_rng([seed, PURPOSE_ATTRIBUTION, int(s.modality)])
        d = np.empty(n_permutations)
        for k in range(n_permutations):
            Xp = X.copy()
            Xp[:, s.start:s.stop] = X[rng.permutation(X.shape[0]), s.start:s.stop]
            d[k] = base - auc_roc(predict_scores(model, Xp), y)
        drops[s.modality] = d
    return base, drops


def shares_from_drops(mean_drops: dict[Modality, float]) -> dict[Modality, float]:
    clipped = {m: max(0.0, float(v)) for m, v in mean_drops.items()}
    total = sum(clipped.values())
    if total <= 0:
        raise DegenerateModelError("no modality reduces AUC when permuted")
    shares = {m: 100.0 * v / total for m, v in clipped.items()}
    # put rounding residue on the largest share so the sum is 100 to the last bit
    top = max(shares, key=lambda m: (shares[m], -int(m)))
    shares[top] += 100.0 - sum(shares.values())
    return shares


def linear_shapley(model: TrainedModel, X, spans: Sequence[GroupSpan]) -> np.ndarray:
    """Exact per-row group contributions for a logistic model.

    Column j contributes ``w_j / sd_j * (x_j - mean_j)``; group sums add up to
    ``logit(x) - intercept``, where the intercept equals the mean training
    logit because the training columns are centred.
    """
    if model.kind is not ModelKind.LOGREG_EN:
        raise TypeError("linear Shapley values need a LogRegEN model")
    X = np.asarray(X, dtype=np.float64)
    p = model.params
    contrib = (X - p["mean"]) / p["scale"] * p["weights"]
    return np.stack([contrib[:, s.start:s.stop].sum(axis=1) for s in spans], axis=1)


def attribute_modalities(model: TrainedModel, X, y, spans: Sequence[GroupSpan],
                         seed: int = 0, n_permutations: int = 20,
                         eps: float = DEGENERATE_EPS) -> AttributionResult:
    base, drops = permutation_drops(model, X, y, spans, seed, n_permutations)
    if base <= 0.5 + eps:
        raise DegenerateModelError(f"baseline AUC-ROC {base:.4f} is not above chance")
    mean_drops = {m: max(0.0, float(d.mean())) for m, d in drops.items()}
    per_patient = None
    if model.kind is ModelKind.LOGREG_EN:
        per_patient = linear_shapley(model, X, spans)
    return AttributionResult(shares_from_drops(mean_drops), mean_drops, base, n_permutations,
                             per_patient, [s.modality for s in spans])


def attribute_cv(plan: CvPlan, y, factory, spans: Sequence[GroupSpan], kind,
                 hyperparams: dict | None = None, repeat: int = 0, n_permutations: int = 20,
                 eps: float = DEGENERATE_EPS) -> AttributionResult:
    """Held-out attribution over the folds of one repeat.

    Each fold's model is trained on its training rows and permuted on its
    test rows; drops and baselines are averaged over folds.
    """
    kind = ModelKind.parse(kind)
    y = np.asarray(y)
    bases, all_drops = [], {s.modality: [] for s in spans}
    for f in range(plan.n_folds):
        tr, te = plan.train_test(repeat, f)
        spec = ModelSpec(kind, hyperparams or {},
                         derive_seed(plan.seed, repeat, f, PURPOSE_ATTRIBUTION))
        model = train(factory(tr, tr), y[tr], spec)
        base, drops = permutation_drops(model, factory(tr, te), y[te], spans,
                                        derive_seed(plan.seed, repeat, f), n_permutations)
        bases.append(base)
        for m, d in drops.items():
            all_drops[m].append(d)
    base = float(np.mean(bases))
    if base <= 0.5 + eps:
        raise DegenerateModelError(f"mean held-out AUC-ROC {base:.4f} is not above chance")
    mean_drops = {m: max(0.0, float(np.mean(v))) for m, v in all_drops.items()}
    return AttributionResult(shares_from_drops(mean_drops), mean_drops, base, n_permutations)
