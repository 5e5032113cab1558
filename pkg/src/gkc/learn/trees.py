"""Tree learners compiled with numba.

Boosted trees are grown level-wise in a heap layout (node k has children
2k+1 and 2k+2) with exact greedy splits found by one pass over presorted
columns per level.  Forest trees are grown depth-first with an explicit
stack and per-split feature subsampling.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_MIN_GAIN = 1e-12


@njit(cache=True)
def _best_split_in_segment(idx, xt, g, h, lo, hi, G, H, lam, mcw, best, j,
                           best_f, best_t):
    """Scan one node's rows (sorted by column j) and update the running best.

    Scores are ``gl^2/(hl+lam) + gr^2/(hr+lam)``; comparisons are made on
    cross-multiplied values to avoid a division per candidate.
    """
    gl = 0.0
    hl = 0.0
    last = -np.inf
    for r in range(lo, hi):
        i = idx[r]
        x = xt[i]
        if x > last and hl >= mcw:
            hr = H - hl
            if hr >= mcw:
                gr = G - gl
                dl = hl + lam
                dr = hr + lam
                den = dl * dr
                num = gl * gl * dr + gr * gr * dl
                if den > 0.0 and num > best * den:
                    best = num / den
                    best_f = j
                    t = 0.5 * (last + x)
                    if t >= x:
                        t = last
                    best_t = t
        gl += g[i]
        hl += h[i]
        last = x
    return best, best_f, best_t


@njit(cache=True)
def _grow_boost_tree(order0, order, buf, is_left, Xt, g, h, max_depth, lam, mcw,
                     feat, thr, val):
    """Fit one regression tree to (g, h); returns per-row leaf weights.

    ``order0[j]`` lists row ids sorted by column j (stable).  Rows of each
    node occupy one contiguous segment in every column's list; segments are
    stably partitioned after each split.  ``order``, ``buf`` and ``is_left``
    are scratch space reused across trees.  ``feat``, ``thr``, ``val`` are heap
    arrays written in place (``feat == -1`` marks a leaf, ``-2`` unused).
    """
    p, n = order0.shape
    # the root level reads order0 directly; the first partition fills ``order``
    node_of = np.zeros(n, np.int64)
    seg_lo = np.zeros(1, np.int64)
    seg_hi = np.full(1, n, np.int64)
    feat[:] = -2
    for depth in range(max_depth + 1):
        src = order0 if depth == 0 else order
        start = (1 << depth) - 1
        width = 1 << depth
        Gn = np.zeros(width)
        Hn = np.zeros(width)
        for q in range(width):
            for r in range(seg_lo[q], seg_hi[q]):
                i = src[0, r]
                Gn[q] += g[i]
                Hn[q] += h[i]
        any_split = False
        for q in range(width):
            k = start + q
            if seg_hi[q] <= seg_lo[q]:
                continue
            bf = -1
            bt = 0.0
            if depth < max_depth and Hn[q] >= 2.0 * mcw:
                best = Gn[q] * Gn[q] / (Hn[q] + lam) + 2.0 * _MIN_GAIN
                for j in range(p):
                    best, bf, bt = _best_split_in_segment(
                        src[j], Xt[j], g, h, seg_lo[q], seg_hi[q], Gn[q], Hn[q],
                        lam, mcw, best, j, bf, bt)
            if bf >= 0:
                feat[k] = bf
                thr[k] = bt
                any_split = True
            else:
                feat[k] = -1
                val[k] = -Gn[q] / (Hn[q] + lam)
        if not any_split:
            break
        # route rows and stably partition every column's segments
        nlo = np.zeros(2 * width, np.int64)
        nhi = np.zeros(2 * width, np.int64)
        for q in range(width):
            k = start + q
            lo = seg_lo[q]
            hi = seg_hi[q]
            if hi <= lo or feat[k] < 0:
                continue
            f = feat[k]
            t = thr[k]
            n_left = 0
            for r in range(lo, hi):
                i = src[0, r]
                go = Xt[f, i] <= t
                is_left[i] = go
                node_of[i] = 2 * k + 2 - go
                n_left += go
            nlo[2 * q] = lo
            nhi[2 * q] = lo + n_left
            nlo[2 * q + 1] = lo + n_left
            nhi[2 * q + 1] = hi
            # the next level scans every column; leaves only need column 0
            n_cols = p if depth + 1 < max_depth else 1
            for j in range(n_cols):
                row_in = src[j]
                row = order[j]
                a = lo
                b = 0
                for r in range(lo, hi):
                    # branch-free stable partition: write to both sides, advance one
                    i = row_in[r]
                    go = is_left[i]
                    row[a] = i
                    buf[b] = i
                    a += go
                    b += 1 - go
                for r in range(b):
                    row[a + r] = buf[r]
        seg_lo = nlo
        seg_hi = nhi
    out = np.empty(n)
    for i in range(n):
        out[i] = val[node_of[i]]
    return out


@njit(cache=True)
def _boost(X, y, n_rounds, lr, max_depth, lam, mcw, base):
    n, p = X.shape
    Xt = np.ascontiguousarray(X.T)
    order0 = np.empty((p, n), np.int32)
    for j in range(p):
        order0[j] = np.argsort(Xt[j], kind="mergesort").astype(np.int32)
    order = np.empty_like(order0)
    buf = np.empty(n, np.int32)
    is_left = np.zeros(n, np.int32)
    n_nodes = (1 << (max_depth + 1)) - 1
    feat = np.full((n_rounds, n_nodes), -2, np.int64)
    thr = np.zeros((n_rounds, n_nodes))
    val = np.zeros((n_rounds, n_nodes))
    F = np.full(n, base)
    g = np.empty(n)
    h = np.empty(n)
    for m in range(n_rounds):
        for i in range(n):
            pr = 1.0 / (1.0 + np.exp(-F[i]))
            g[i] = pr - y[i]
            h[i] = pr * (1.0 - pr)
        leaf = _grow_boost_tree(order0, order, buf, is_left, Xt, g, h, max_depth, lam,
                                mcw, feat[m], thr[m], val[m])
        for k in range(n_nodes):
            val[m, k] *= lr
        for i in range(n):
            F[i] += lr * leaf[i]
    return feat, thr, val


@njit(cache=True)
def _heap_predict(X, feat, thr, val, n_rounds, base, out):
    n = X.shape[0]
    for i in range(n):
        s = base
        for m in range(n_rounds):
            k = 0
            while feat[m, k] >= 0:
                if X[i, feat[m, k]] <= thr[m, k]:
                    k = 2 * k + 1
                else:
                    k = 2 * k + 2
            s += val[m, k]
        out[i] = s
    return out


@njit(cache=True)
def _heap_predict_staged(X, feat, thr, val, stages, base):
    """Margins after each round count in ``stages`` (ascending)."""
    n = X.shape[0]
    out = np.empty((stages.shape[0], n))
    for i in range(n):
        s = base
        si = 0
        for m in range(stages[-1] + 1):
            while si < stages.shape[0] and stages[si] == m:
                out[si, i] = s
                si += 1
            if m == stages[-1]:
                break
            k = 0
            while feat[m, k] >= 0:
                if X[i, feat[m, k]] <= thr[m, k]:
                    k = 2 * k + 1
                else:
                    k = 2 * k + 2
            s += val[m, k]
    return out


def fit_boosted(X, y, n_rounds, learning_rate, max_depth, l2_leaf_reg, min_child_weight):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    prev = min(max(y.mean(), 1e-6), 1 - 1e-6)
    base = float(np.log(prev / (1 - prev)))
    # constant columns can never split; scanning only the others is exact
    active = np.flatnonzero(X.max(axis=0) > X.min(axis=0)) if X.shape[0] else np.arange(0)
    if active.size == 0:
        active = np.arange(min(1, X.shape[1]))
    feat, thr, val = _boost(np.ascontiguousarray(X[:, active]), y, int(n_rounds),
                            float(learning_rate), int(max_depth), float(l2_leaf_reg),
                            float(min_child_weight), base)
    feat = np.where(feat >= 0, active[np.maximum(feat, 0)], feat)
    return base, feat, thr, val


def boosted_margin(X, base, feat, thr, val, n_rounds=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    m = feat.shape[0] if n_rounds is None else int(n_rounds)
    if m == 0:
        return np.full(X.shape[0], base)
    return _heap_predict(X, feat, thr, val, m, base, np.empty(X.shape[0]))


def boosted_margin_staged(X, base, feat, thr, val, stages):
    X = np.ascontiguousarray(X, dtype=np.float64)
    stages = np.asarray(sorted(stages), dtype=np.int64)
    if stages[-1] > feat.shape[0]:
        raise ValueError("stage exceeds fitted rounds")
    return _heap_predict_staged(X, feat, thr, val, stages, base)


# ---------------------------------------------------------------- forest

@njit(cache=True)
def _grow_forest_tree(X, y, rows, max_depth, n_try, min_leaf, seed,
                      feat, thr, left, right, val):
    """Depth-first gini tree on ``rows`` (bootstrap sample, may repeat).

    Returns the node count.  ``feat[k] == -1`` marks a leaf.
    """
    np.random.seed(seed)
    p = X.shape[1]
    m = rows.shape[0]
    # stack of (node, lo, hi, depth) over the working index array
    work = rows.copy()
    stack = np.empty((2 * m + 2, 4), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    vals = np.empty(m)
    labs = np.empty(m)
    while top > 0:
        top -= 1
        k = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        depth = stack[top, 3]
        size = hi - lo
        pos = 0.0
        for r in range(lo, hi):
            pos += y[work[r]]
        val[k] = pos / size
        feat[k] = -1
        if depth >= max_depth or pos == 0.0 or pos == size or size < 2 * min_leaf:
            continue
        parent = 1.0 - (pos / size) ** 2 - (1.0 - pos / size) ** 2
        best = 1e-12
        best_f = -1
        best_t = 0.0
        cand = np.random.permutation(p)[:n_try]
        for c in range(n_try):
            j = cand[c]
            for r in range(size):
                vals[r] = X[work[lo + r], j]
            o = np.argsort(vals[:size], kind="mergesort")
            for r in range(size):
                labs[r] = y[work[lo + o[r]]]
            lp = 0.0
            for r in range(size - 1):
                lp += labs[r]
                nl = r + 1
                nr = size - nl
                a = vals[o[r]]
                b = vals[o[r + 1]]
                if b <= a or nl < min_leaf or nr < min_leaf:
                    continue
                rp = pos - lp
                gl = 1.0 - (lp / nl) ** 2 - (1.0 - lp / nl) ** 2
                gr = 1.0 - (rp / nr) ** 2 - (1.0 - rp / nr) ** 2
                dec = parent - (nl * gl + nr * gr) / size
                if dec > best:
                    best = dec
                    best_f = j
                    t = 0.5 * (a + b)
                    best_t = t if t < b else a
        if best_f < 0:
            continue
        # partition work[lo:hi] in place
        i = lo
        jj = hi - 1
        while i <= jj:
            if X[work[i], best_f] <= best_t:
                i += 1
            else:
                tmp = work[i]
                work[i] = work[jj]
                work[jj] = tmp
                jj -= 1
        feat[k] = best_f
        thr[k] = best_t
        left[k] = n_nodes
        right[k] = n_nodes + 1
        stack[top, 0] = n_nodes + 1
        stack[top, 1] = i
        stack[top, 2] = hi
        stack[top, 3] = depth + 1
        stack[top + 1, 0] = n_nodes
        stack[top + 1, 1] = lo
        stack[top + 1, 2] = i
        stack[top + 1, 3] = depth + 1
        top += 2
        n_nodes += 2
    return n_nodes


@njit(cache=True)
def _forest_predict(X, feat, thr, left, right, val, out):
    n = X.shape[0]
    T = feat.shape[0]
    for i in range(n):
        s = 0.0
        for t in range(T):
            k = 0
            while feat[t, k] >= 0:
                if X[i, feat[t, k]] <= thr[t, k]:
                    k = left[t, k]
                else:
                    k = right[t, k]
            s += val[t, k]
        out[i] = s / T
    return out


def tree_seeds(seed: int, n_trees: int) -> np.ndarray:
    """Per-tree 32-bit seeds derived from (seed, tree index)."""
    return np.array([np.random.SeedSequence([seed, t]).generate_state(1)[0]
                     for t in range(n_trees)], dtype=np.int64)


def fit_forest(X, y, n_trees, max_depth, feature_fraction, min_leaf, seed, bootstrap=True):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if feature_fraction is None:
        n_try = max(1, int(round(np.sqrt(p))))
    else:
        n_try = max(1, min(p, int(round(feature_fraction * p))))
    cap = 2 * n + 1
    feat = np.full((n_trees, cap), -2, np.int64)
    thr = np.zeros((n_trees, cap))
    left = np.zeros((n_trees, cap), np.int64)
    right = np.zeros((n_trees, cap), np.int64)
    val = np.zeros((n_trees, cap))
    oob = np.zeros((n_trees, n), dtype=bool)
    used = 1
    for t, s in enumerate(tree_seeds(seed, n_trees)):
        if bootstrap:
            rows = np.sort(np.random.default_rng(int(s)).integers(0, n, n))
        else:
            rows = np.arange(n)
        oob[t] = True
        oob[t, rows] = False
        k = _grow_forest_tree(X, y, rows.astype(np.int64), int(max_depth), n_try,
                              int(min_leaf), int(s), feat[t], thr[t], left[t], right[t], val[t])
        used = max(used, k)
    return (feat[:, :used].copy(), thr[:, :used].copy(), left[:, :used].copy(),
            right[:, :used].copy(), val[:, :used].copy(), oob)


def forest_predict(X, feat, thr, left, right, val):
    X = np.ascontiguousarray(X, dtype=np.float64)
    return _forest_predict(X, feat, thr, left, right, val, np.empty(X.shape[0]))
