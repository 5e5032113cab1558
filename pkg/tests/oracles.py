"""Independent brute-force references used by the test suite.

Each oracle is written from the definition, without sharing code with the
package, so agreement is evidence that the fast implementation is right.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np


def auc_pairwise(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties count 1/2."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = Fraction(0)
    for p in pos:
        for n in neg:
            total += 1 if p > n else Fraction(1, 2) if p == n else 0
    return float(total / (len(pos) * len(neg)))


def average_precision_bruteforce(scores, labels) -> float:
    """Average of precision at every distinct threshold that admits a positive.

    For threshold t the predicted-positive set is {i: s_i >= t}.  A tied
    block therefore enters all at once, and each positive in it is credited
    with the precision of the whole block.
    """
    scores = list(scores)
    labels = list(labels)
    n_pos = sum(labels)
    total = Fraction(0)
    for t in sorted(set(scores), reverse=True):
        chosen = [i for i, s in enumerate(scores) if s >= t]
        new_pos = sum(labels[i] for i, s in enumerate(scores) if s == t)
        if new_pos:
            prec = Fraction(sum(labels[i] for i in chosen), len(chosen))
            total += new_pos * prec
    return float(total / n_pos)


def wilcoxon_enumerate(a, b) -> tuple[float, float]:
    """(W, two-sided p) by listing all 2^n sign patterns of the nonzero ranks.

    Ranks are average ranks of |a - b| over nonzero differences.  The p-value
    is P(min(W+, W-) <= observed) under the sign-flip null, capped at 1.
    """
    d = [x - y for x, y in zip(a, b) if x - y != 0]
    n = len(d)
    mags = sorted(abs(v) for v in d)
    rank_of = {}
    i = 0
    while i < n:
        j = i
        while j + 1 < n and mags[j + 1] == mags[i]:
            j += 1
        rank_of[mags[i]] = Fraction(i + j + 2, 2)
        i = j + 1
    ranks = [rank_of[abs(v)] for v in d]
    total = sum(ranks)
    w_plus = sum(r for r, v in zip(ranks, d) if v > 0)
    w = min(w_plus, total - w_plus)
    # every sign pattern as a row of bits; doubled ranks keep the sums integral
    r2 = np.array([int(2 * r) for r in ranks], dtype=np.int64)
    bits = (np.arange(2 ** n)[:, None] >> np.arange(n)) & 1
    wp2 = bits @ r2
    hits = int(np.sum(np.minimum(wp2, int(2 * total) - wp2) <= int(2 * w)))
    return float(w), min(1.0, hits / 2 ** n)


def central_difference(f, x, h=1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def best_stump(x, g, h, lam, min_child_weight=0.0):
    """Exhaustive single-split search on one feature for second-order boosting.

    Returns ``(threshold, gain)`` with the threshold at the midpoint between
    adjacent distinct values; gain is the usual structure-score improvement.
    """
    order = np.argsort(x, kind="stable")
    xs, gs, hs = x[order], g[order], h[order]
    G, H = gs.sum(), hs.sum()
    best = (None, 0.0)
    for k in range(1, len(xs)):
        if xs[k] == xs[k - 1]:
            continue
        gl, hl = gs[:k].sum(), hs[:k].sum()
        gr, hr = G - gl, H - hl
        if hl < min_child_weight or hr < min_child_weight:
            continue
        gain = gl ** 2 / (hl + lam) + gr ** 2 / (hr + lam) - G ** 2 / (H + lam)
        if gain > best[1] + 1e-12:
            best = (0.5 * (xs[k] + xs[k - 1]), gain)
    return best
