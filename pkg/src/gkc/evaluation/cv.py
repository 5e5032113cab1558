"""Repeated stratified cross-validation with nested hyperparameter tuning."""
from __future__ import annotations

import contextlib
import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..learn import ModelKind, ModelSpec, auc_prc, auc_roc, predict_scores, train

GRID_VERSION = "grids-v1"

DEFAULT_GRIDS: dict[ModelKind, dict[str, list]] = {
    ModelKind.LOGREG_EN: {"lambda": [1e-3, 1e-2, 1e-1, 1.0], "alpha": [0.2, 0.5, 0.8]},
    ModelKind.GRAD_BOOST: {"n_rounds": [50, 200], "max_depth": [2, 3],
                           "learning_rate": [0.05, 0.1]},
    ModelKind.RANDOM_FOREST: {"n_trees": [200], "max_depth": [4, 8]},
}

# purposes mixed into derived seeds so that no two random streams coincide
PURPOSE_PLAN = 0
PURPOSE_INNER_FOLDS = 1
PURPOSE_INNER_MODEL = 2
PURPOSE_OUTER_MODEL = 3
PURPOSE_BOOTSTRAP = 4
PURPOSE_ATTRIBUTION = 5


class TooFewPerClassError(ValueError):
    pass


class FoldFailure(RuntimeError):
    pass


def derive_seed(*keys: int) -> int:
    """64-bit seed that depends on every key; stable across platforms."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CvPlan:
    n_folds: int
    n_repeats: int
    seed: int
    assignments: np.ndarray      # (n_repeats, n_rows) fold index per row

    def train_test(self, repeat: int, fold: int):
        a = self.assignments[repeat]
        return np.flatnonzero(a != fold), np.flatnonzero(a == fold)

    def splits(self):
        for r in range(self.n_repeats):
            for f in range(self.n_folds):
                yield r, f, *self.train_test(r, f)

    @property
    def n_rows(self) -> int:
        return int(self.assignments.shape[1])


def stratified_assignment(labels, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    """Shuffle each class, then deal rows round-robin into folds.

    Dealing continues across classes (negatives pick up where positives
    stopped), so both per-fold class counts and fold sizes differ by at most 1.
    """
    y = np.asarray(labels).astype(int)
    out = np.empty(y.size, dtype=np.int64)
    pos = rng.permutation(np.flatnonzero(y == 1))
    neg = rng.permutation(np.flatnonzero(y == 0))
    order = np.concatenate([pos, neg])
    out[order] = np.arange(order.size) % n_folds
    return out


def make_cv_plan(labels, n_folds: int = 5, n_repeats: int = 10, seed: int = 0) -> CvPlan:
    y = np.asarray(labels).astype(int)
    counts = np.bincount(y, minlength=2)
    if counts.min() < n_folds:
        raise TooFewPerClassError(f"class counts {counts.tolist()} < {n_folds} folds")
    assign = np.stack([
        stratified_assignment(y, n_folds, np.random.default_rng([seed, PURPOSE_PLAN, r]))
        for r in range(n_repeats)])
    return CvPlan(n_folds, n_repeats, seed, assign)


def expand_grid(grid: Mapping[str, Sequence] | Sequence[Mapping]) -> list[dict]:
    """Grid points in declaration order (last key varies fastest)."""
    if isinstance(grid, Mapping):
        keys = list(grid)
        points = [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    else:
        points = [dict(p) for p in grid]
    if not points:
        raise ValueError("hyperparameter grid is empty")
    return points


Factory = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _inner_scores(kind, points, X_tr, y_tr, X_va, y_va, seed):
    """Validation AUC per grid point; failed points score -inf.

    GradBoost points that differ only in ``n_rounds`` share one fit, read
    out at each round count.
    """
    out = np.full(len(points), -np.inf)
    if kind is ModelKind.GRAD_BOOST:
        groups: dict[tuple, list[int]] = {}
        for k, p in enumerate(points):
            key = tuple(sorted((a, b) for a, b in p.items() if a != "n_rounds"))
            groups.setdefault(key, []).append(k)
        for key, idx in groups.items():
            rounds = [int(points[k].get("n_rounds", ModelSpec(kind).hyperparams["n_rounds"]))
                      for k in idx]
            try:
                spec = ModelSpec(kind, {**dict(key), "n_rounds": max(rounds)}, seed)
                model = train(X_tr, y_tr, spec)
                staged = model.staged_scores(X_va, sorted(set(rounds)))
                by_round = dict(zip(sorted(set(rounds)), staged))
                for k, m in zip(idx, rounds):
                    out[k] = auc_roc(by_round[m], y_va)
            except (ValueError, ArithmeticError):
                pass
        return out
    for k, p in enumerate(points):
        try:
            model = train(X_tr, y_tr, ModelSpec(kind, p, seed))
            out[k] = auc_roc(predict_scores(model, X_va), y_va)
        except (ValueError, ArithmeticError):
            pass
    return out


def inner_tune(train_rows, y, factory: Factory, kind, grid, inner_folds: int = 3,
               seed: int = 0) -> tuple[dict, np.ndarray]:
    """Pick the grid point with the best mean inner AUC-ROC.

    Only ``train_rows`` are touched: inner folds split them, and features for
    each inner fold are fitted on its inner-training part.  Ties go to the
    earliest grid point.  Returns ``(best_point, mean_scores)``.
    """
    kind = ModelKind.parse(kind)
    points = expand_grid(grid)
    if len(points) == 1:
        return points[0], np.array([np.nan])
    train_rows = np.asarray(train_rows, dtype=np.int64)
    y = np.asarray(y)
    y_tr = y[train_rows]
    assign = stratified_assignment(y_tr, inner_folds,
                                   np.random.default_rng([seed, PURPOSE_INNER_FOLDS]))
    scores = np.zeros((inner_folds, len(points)))
    for f in range(inner_folds):
        fit = train_rows[assign != f]
        val = train_rows[assign == f]
        X_fit = factory(fit, fit)
        X_val = factory(fit, val)
        scores[f] = _inner_scores(kind, points, X_fit, y[fit], X_val, y[val],
                                  derive_seed(seed, PURPOSE_INNER_MODEL, f))
    mean = scores.mean(axis=0)
    return points[int(np.argmax(mean))], mean


@dataclass(frozen=True)
class MetricsRecord:
    repeat: int
    fold: int
    strategy: str
    subset: str
    model: str
    hyperparams: dict = field(hash=False)
    auc_roc: float
    auc_prc: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.repeat, self.fold)


@contextlib.contextmanager
def _stage(audit, *stage):
    if audit is None:
        yield
    else:
        with audit.stage(*stage):
            yield


def run_fold(plan: CvPlan, repeat: int, fold: int, y, factory: Factory, kind, grid,
             strategy: str = "", subset: str = "", inner_folds: int = 3,
             audit=None) -> MetricsRecord:
    kind = ModelKind.parse(kind)
    y = np.asarray(y)
    tr, te = plan.train_test(repeat, fold)
    with _stage(audit, "tune", repeat, fold):
        best, _ = inner_tune(tr, y, factory, kind, grid, inner_folds,
                             seed=derive_seed(plan.seed, repeat, fold))
    with _stage(audit, "train", repeat, fold):
        X_tr = factory(tr, tr)
        model = train(X_tr, y[tr], ModelSpec(kind, best, derive_seed(
            plan.seed, repeat, fold, PURPOSE_OUTER_MODEL)))
    with _stage(audit, "score", repeat, fold):
        X_te = factory(tr, te)
    s = predict_scores(model, X_te)
    return MetricsRecord(repeat, fold, strategy, subset, kind.value, dict(best),
                         auc_roc(s, y[te]), auc_prc(s, y[te]))


def run_cv(plan: CvPlan, y, factory: Factory, kind, grid=None, strategy: str = "",
           subset: str = "", inner_folds: int = 3, audit=None, n_jobs: int = 1,
           progress: Callable[[int, int], None] | None = None) -> list[MetricsRecord]:
    """One record per (repeat, fold), sorted by key.

    Any fold failure aborts the run, since paired tests need complete samples.
    Parallel execution (``n_jobs != 1``) uses joblib processes and cannot be
    combined with an audited cohort.
    """
    kind = ModelKind.parse(kind)
    grid = DEFAULT_GRIDS[kind] if grid is None else grid
    y = np.asarray(y)
    if y.size != plan.n_rows:
        raise ValueError(f"plan covers {plan.n_rows} rows, labels have {y.size}")
    keys = [(r, f) for r in range(plan.n_repeats) for f in range(plan.n_folds)]
    args = (y, factory, kind, grid, strategy, subset, inner_folds)
    if n_jobs == 1:
        records = []
        for k, (r, f) in enumerate(keys):
            try:
                records.append(run_fold(plan, r, f, *args, audit=audit))
            except Exception as exc:
                raise FoldFailure(f"repeat {r} fold {f}: {exc}") from exc
            if progress is not None:
                progress(k + 1, len(keys))
    else:
        if audit is not None:
            raise ValueError("auditing requires n_jobs=1")
        from joblib import Parallel, delayed
        records = Parallel(n_jobs=n_jobs)(
            delayed(run_fold)(plan, r, f, *args) for r, f in keys)
    return sorted(records, key=lambda rec: rec.key)
