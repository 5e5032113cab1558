"""Bootstrap intervals, the Wilcoxon signed-rank test and metric summaries."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm, rankdata

EXACT_MAX_N = 25
MIN_PAIRS = 5


class TooFewPairsError(ValueError):
    pass


class PairingError(ValueError):
    pass


def bootstrap_ci(values, B: int = 1000, level: float = 0.95, seed: int = 0
                 ) -> tuple[float, float]:
    """Percentile interval of the mean over ``B`` seeded resamples."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("bootstrap needs at least one value")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, v.size, size=(B, v.size))
    means = v[idx].mean(axis=1)
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [a, 1.0 - a])
    return float(lo), float(hi)


@dataclass(frozen=True)
class ComparisonResult:
    a: str
    b: str
    w: float
    p_value: float
    n_effective: int
    method: str                # "exact", "normal" or "all-zero"
    w_plus: float = 0.0
    w_minus: float = 0.0
    mean_difference: float = 0.0

    @property
    def approximate(self) -> bool:
        return self.method == "normal"


def _exact_p(ranks2: np.ndarray, w2: int) -> float:
    """Two-sided p = min(1, 2 P(T <= w)) for the signed-rank sum T.

    Works on doubled ranks so tied (half-integer) ranks stay integral; the
    null distribution is built by dynamic programming over sign choices,
    which equals enumerating all 2^n sign patterns.
    """
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in ranks2.astype(int):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    n = ranks2.size
    tail = int(counts[: w2 + 1].sum())
    return min(1.0, (2 * tail) / (1 << n))


def wilcoxon_signed_rank(a, b, names: tuple[str, str] = ("a", "b"),
                         exact_max_n: int = EXACT_MAX_N) -> ComparisonResult:
    """Paired two-sided signed-rank test.

    Zero differences are dropped.  Ties in ``|a - b|`` receive average ranks.
    ``W = min(W+, W-)``.  Exact p for up to ``exact_max_n`` nonzero pairs,
    otherwise the normal approximation with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise PairingError("paired samples differ in length")
    d = a - b
    mean_diff = float(d.mean()) if d.size else 0.0
    d = d[d != 0]
    n = d.size
    if n == 0 and a.size > 0:
        return ComparisonResult(*names, 0.0, 1.0, 0, "all-zero", 0.0, 0.0, mean_diff)
    if n < MIN_PAIRS:
        raise TooFewPairsError(f"{n} nonzero paired differences; need at least {MIN_PAIRS}")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= exact_max_n:
        p = _exact_p(np.rint(2 * ranks).astype(np.int64), int(round(2 * w)))
        method = "exact"
    else:
        _, t = np.unique(ranks, return_counts=True)
        mu = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(t ** 3 - t)) / 48.0
        z = (w - mu + 0.5) / math.sqrt(var) if var > 0 else 0.0
        p = min(1.0, 2.0 * float(norm.cdf(min(z, 0.0))))
        method = "normal"
    return ComparisonResult(*names, w, p, n, method, w_plus, w_minus, mean_diff)


def compare_records(recs_a: Sequence, recs_b: Sequence, metric: str = "auc_roc",
                    names: tuple[str, str] | None = None) -> ComparisonResult:
    """Wilcoxon on per-fold metrics, requiring identical (repeat, fold) keys."""
    ka = {r.key: getattr(r, metric) for r in recs_a}
    kb = {r.key: getattr(r, metric) for r in recs_b}
    if len(ka) != len(recs_a) or len(kb) != len(recs_b) or set(ka) != set(kb):
        raise PairingError("records are not paired on identical (repeat, fold) keys")
    keys = sorted(ka)
    if names is None:
        names = (_config_name(recs_a[0]), _config_name(recs_b[0]))
    return wilcoxon_signed_rank([ka[k] for k in keys], [kb[k] for k in keys], names)


def _config_name(rec) -> str:
    return f"{rec.strategy}/{rec.subset}/{rec.model}"


@dataclass(frozen=True)
class MetricsSummary:
    metric: str
    n: int
    mean: float
    sd: float
    ci_lo: float
    ci_hi: float


def summarize(values, metric: str, B: int = 1000, level: float = 0.95,
              seed: int = 0) -> MetricsSummary:
    v = np.asarray(values, dtype=np.float64)
    lo, hi = bootstrap_ci(v, B, level, seed)
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return MetricsSummary(metric, int(v.size), float(v.mean()), sd, lo, hi)


def summarize_records(records: Sequence, B: int = 1000, seed: int = 0
                      ) -> dict[str, MetricsSummary]:
    recs = sorted(records, key=lambda r: r.key)
    return {m: summarize([getattr(r, m) for r in recs], m, B, seed=seed)
            for m in ("auc_roc", "auc_prc")}
