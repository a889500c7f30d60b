"""Independent reference implementations used as test oracles."""

import numpy as np


def oracle_best_split(X, y, n_classes):
    """Brute-force split search: enumerate every midpoint between consecutive
    distinct sorted values of every feature, recount both children from
    scratch, and keep the lowest weighted child impurity (ties: lower feature
    index, then lower threshold). Returns None when nothing strictly beats
    the parent impurity.

    Impurity uses the canonical float64 form (n - ssl/nl - ssr/nr)/n over
    exact integer counts, the quantity the trainer is specified to minimize.
    """
    X = np.asarray(X, float)
    y = np.asarray(y)
    n = len(y)
    best = None
    for j in range(X.shape[1]):
        distinct = sorted(set(X[:, j].tolist()))
        for a, b in zip(distinct, distinct[1:]):
            thr = 0.5 * (a + b)
            if not thr < b:
                thr = a
            left_mask = X[:, j] <= thr
            nl = int(left_mask.sum())
            nr = n - nl
            if nl == 0 or nr == 0:
                continue
            cl = np.bincount(y[left_mask], minlength=n_classes).astype(float)
            cr = np.bincount(y[~left_mask], minlength=n_classes).astype(float)
            ssl = float(np.dot(cl, cl))
            ssr = float(np.dot(cr, cr))
            imp = (n - ssl / nl - ssr / nr) / n
            if best is None or imp < best[0]:
                best = (imp, j, thr)
    if best is None:
        return None
    c = np.bincount(y, minlength=n_classes).astype(float)
    parent = (n - float(np.dot(c, c)) / n) / n
    if not best[0] < parent:
        return None
    return best[1], best[2], best[0]


def check_tree_against_oracle(tree, X, y, n_classes, max_depth, min_samples_split=2):
    """Replay a trained tree and require every internal node's split to equal
    the oracle's choice, and every leaf to be justified (pure, too small, at
    depth, or oracle-None). Returns the number of nodes checked."""
    X = np.asarray(X, float)
    y = np.asarray(y)
    checked = 0

    def recurse(node, rows, depth):
        nonlocal checked
        checked += 1
        if tree.feature[node] == -1:
            justified = (
                len(rows) < min_samples_split
                or depth >= max_depth
                or len(set(y[rows].tolist())) == 1
                or oracle_best_split(X[rows], y[rows], n_classes) is None
            )
            assert justified, f"unjustified leaf at node {node} ({len(rows)} rows)"
            return
        expect = oracle_best_split(X[rows], y[rows], n_classes)
        assert expect is not None, f"node {node} split where oracle finds none"
        got = (int(tree.feature[node]), float(tree.threshold[node]))
        assert got == (expect[0], expect[1]), (
            f"node {node}: trainer chose {got}, oracle {expect[:2]}"
        )
        go_left = X[rows, got[0]] <= got[1]
        recurse(int(tree.left[node]), rows[go_left], depth + 1)
        recurse(int(tree.right[node]), rows[~go_left], depth + 1)

    recurse(0, np.arange(len(y)), 0)
    return checked
