"""Ranking metrics: ROC area (Mann-Whitney form) and average precision."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


class SingleClassError(ValueError):
    pass


class NoPositiveError(ValueError):
    pass


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError(f"scores and labels differ in length ({s.size} vs {y.size})")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    return s, y.astype(bool)


def auc_roc(scores, labels) -> float:
    """P(score_pos > score_neg) with ties credited one half."""
    s, y = _check(scores, labels)
    n1 = int(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise SingleClassError("AUC-ROC needs both classes")
    ranks = rankdata(s)  # average ranks give the half credit for ties
    return float((ranks[y].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def auc_prc(scores, labels) -> float:
    """Average precision, sum over thresholds of precision times recall gained.

    Tied scores form a single threshold, so a block of tied rows contributes
    the precision at the end of the block for each positive inside it.
    Without ties this is the mean precision at each positive's rank.
    """
    s, y = _check(scores, labels)
    n1 = int(y.sum())
    if n1 == 0:
        raise NoPositiveError("AUC-PRC needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y)
    # last index of each tied block
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp_end = tp[ends]
    precision = tp_end / (ends + 1.0)
    gained = np.diff(np.r_[0, tp_end])
    return float(np.sum(precision * gained) / n1)
