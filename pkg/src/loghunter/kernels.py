"""Hot numeric kernels: numba-jitted fast path with a pure-numpy fallback.

The numpy fallback is selected by setting ``LOGHUNTER_NUMBA=0`` in the
environment (or automatically when numba is not importable). Both paths
implement the same arithmetic on the same operand order, so they produce
bit-identical results; ``benchmarks/bench_kernels.py`` compares their speed.

Kernels here are deterministic pure functions. All randomness (bootstraps,
feature subsets, SMOTE draws) stays outside, in numpy Generators, so the
selected path never changes results.
"""

from __future__ import annotations

import os

import numpy as np


def _flag_enabled() -> bool:
    return os.environ.get("LOGHUNTER_NUMBA", "1").strip().lower() not in (
        "0", "false", "off", "no",
    )


# --------------------------------------------------------------------------
# Split scan
#
# Weighted child impurity is pinned to the canonical float64 expression
#   (n - ssl/nl - ssr/nr) / n
# where ssl, ssr are sums of squared child class counts. Counts are exact
# small integers in float64, so any implementation of this expression over
# the same candidate agrees to the last bit.
# --------------------------------------------------------------------------

def _scan_splits_py(X, y, n_classes):
    """Best (feature, threshold) over candidate columns of X.

    X is the (rows, n_candidates) float64 submatrix of candidate features,
    y the int64 labels. Candidates are scanned in ascending column order and
    thresholds in ascending value order with strict improvement only, which
    realizes the (lower feature index, lower threshold) tie-break.

    Returns (best_col, best_threshold, best_impurity); best_col is -1 when
    no column has two distinct values.
    """
    n, n_feat = X.shape
    best_col = -1
    best_thr = 0.0
    best_imp = np.inf
    total = np.zeros(n_classes, np.float64)
    for i in range(n):
        total[y[i]] += 1.0
    for j in range(n_feat):
        order = np.argsort(X[:, j])
        left = np.zeros(n_classes, np.float64)
        for i in range(n - 1):
            left[y[order[i]]] += 1.0
            v = X[order[i], j]
            v_next = X[order[i + 1], j]
            if v == v_next:
                continue
            thr = 0.5 * (v + v_next)
            if not thr < v_next:  # midpoint rounded up to v_next
                thr = v
            nl = float(i + 1)
            nr = float(n - i - 1)
            ssl = 0.0
            ssr = 0.0
            for k in range(n_classes):
                ssl += left[k] * left[k]
                r = total[k] - left[k]
                ssr += r * r
            imp = (n - ssl / nl - ssr / nr) / n
            if imp < best_imp:
                best_imp = imp
                best_col = j
                best_thr = thr
    return best_col, best_thr, best_imp


def _scan_splits_numpy(X, y, n_classes):
    """Vectorized fallback for :func:`_scan_splits_py` (same contract)."""
    n, n_feat = X.shape
    best_col = -1
    best_thr = 0.0
    best_imp = np.inf
    if n < 2:
        return best_col, best_thr, best_imp
    onehot = np.zeros((n, n_classes), np.float64)
    for j in range(n_feat):
        order = np.argsort(X[:, j])
        sv = X[order, j]
        cut = sv[:-1] != sv[1:]
        if not cut.any():
            continue
        onehot[:] = 0.0
        onehot[np.arange(n), y[order]] = 1.0
        cum = np.cumsum(onehot, axis=0)
        total = cum[-1]
        left = cum[:-1][cut]
        nl = (np.arange(1, n, dtype=np.float64))[cut]
        nr = n - nl
        ssl = np.einsum("ik,ik->i", left, left)
        right = total - left
        ssr = np.einsum("ik,ik->i", right, right)
        imp = (n - ssl / nl - ssr / nr) / n
        pos = int(np.argmin(imp))  # first minimum == lowest threshold
        if imp[pos] < best_imp:
            best_imp = float(imp[pos])
            best_col = j
            lo = sv[:-1][cut][pos]
            hi = sv[1:][cut][pos]
            thr = 0.5 * (lo + hi)
            if not thr < hi:
                thr = lo
            best_thr = float(thr)
    return best_col, best_thr, best_imp


# --------------------------------------------------------------------------
# Tree traversal
# --------------------------------------------------------------------------

def _tree_apply_py(feature, threshold, left, right, X):
    """Leaf node index reached by each row of X. feature[i] == -1 marks leaves."""
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def _tree_apply_numpy(feature, threshold, left, right, X):
    n = X.shape[0]
    node = np.zeros(n, np.int64)
    active = feature[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        cur = node[idx]
        go_left = X[idx, feature[cur]] <= threshold[cur]
        node[idx] = np.where(go_left, left[cur], right[cur])
        active[idx] = feature[node[idx]] >= 0
    return node


# --------------------------------------------------------------------------
# Pairwise squared Euclidean distances (SMOTE k-NN)
# --------------------------------------------------------------------------

def _sq_dists_py(A, B):
    na, d = A.shape
    nb = B.shape[0]
    out = np.zeros((na, nb), np.float64)
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for k in range(d):
                diff = A[i, k] - B[j, k]
                acc += diff * diff
            out[i, j] = acc
    return out


def _sq_dists_numpy(A, B):
    na, d = A.shape
    nb = B.shape[0]
    out = np.zeros((na, nb), np.float64)
    # accumulate per feature in ascending order: matches the loop kernel bitwise
    for k in range(d):
        diff = A[:, k, None] - B[None, :, k]
        out += diff * diff
    return out


# --------------------------------------------------------------------------
# Path selection
# --------------------------------------------------------------------------

NUMBA_AVAILABLE = False
_nb = {}
if _flag_enabled():
    try:
        from numba import njit

        _nb["scan_splits"] = njit(cache=True)(_scan_splits_py)
        _nb["tree_apply"] = njit(cache=True)(_tree_apply_py)
        _nb["sq_dists"] = njit(cache=True)(_sq_dists_py)
        NUMBA_AVAILABLE = True
    except ImportError:
        _nb.clear()

NUMPY_IMPLS = {
    "scan_splits": _scan_splits_numpy,
    "tree_apply": _tree_apply_numpy,
    "sq_dists": _sq_dists_numpy,
}

USING_NUMBA = NUMBA_AVAILABLE

if USING_NUMBA:
    scan_splits = _nb["scan_splits"]
    tree_apply = _nb["tree_apply"]
    sq_dists = _nb["sq_dists"]
else:
    scan_splits = NUMPY_IMPLS["scan_splits"]
    tree_apply = NUMPY_IMPLS["tree_apply"]
    sq_dists = NUMPY_IMPLS["sq_dists"]

ACTIVE_IMPLS = {
    "scan_splits": scan_splits,
    "tree_apply": tree_apply,
    "sq_dists": sq_dists,
}
NUMBA_IMPLS = dict(_nb)


def warmup() -> None:
    """Trigger jit compilation on toy inputs so timings stay honest."""
    X = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]])
    y = np.array([0, 1, 0], np.int64)
    scan_splits(X, y, 2)
    feat = np.array([0, -1, -1], np.int64)
    thr = np.array([0.5, 0.0, 0.0])
    tree_apply(feat, thr, np.array([1, -1, -1], np.int64),
               np.array([2, -1, -1], np.int64), X)
    sq_dists(X, X)
