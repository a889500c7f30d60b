"""From-scratch random forest: CART trees split on Gini impurity over
midpoint thresholds, bootstrap sampling, per-node feature subsets, majority
vote, plus incremental batch extension and random batch dropping.

Determinism contract: tree ti of batch b draws every random decision from
the stream (config.seed, b, ti), so serial and parallel training, or
offline and streaming extension, produce identical forests.

Weighted child impurity uses the canonical float64 form
(n - ssl/nl - ssr/nr) / n over exact integer class counts; splits are
accepted only when strictly below the parent's impurity in the same form,
and ties break toward the lower feature index, then the lower threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from ._version import __version__
from .encode import EncodingMap, FeatureMatrix
from .errors import DataError


def gini(class_counts) -> float:
    """Gini impurity 1 - sum((c/total)^2); lies in [0, 1 - 1/K]."""
    counts = np.asarray(class_counts, np.float64)
    if counts.size == 0:
        raise DataError("gini needs at least one class count")
    total = counts.sum()
    if total <= 0:
        raise DataError("gini needs a positive total count")
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _canonical_impurity(counts: np.ndarray) -> float:
    # same expression family the split scan uses, so comparisons are exact
    n = float(counts.sum())
    ss = 0.0
    for c in counts:
        ss += float(c) * float(c)
    return (n - ss / n) / n


def best_split(rows, labels, candidate_features, min_samples_split: int = 2):
    """Best (feature, threshold, weighted child impurity) over the given
    candidate features, or None when no split strictly reduces impurity.

    Thresholds are midpoints between consecutive distinct sorted values.
    """
    X = np.asarray(rows, np.float64)
    y = np.asarray(labels, np.int64)
    if len(y) < min_samples_split:
        return None
    n_classes = int(y.max()) + 1
    cand = sorted(int(c) for c in candidate_features)
    sub = np.ascontiguousarray(X[:, cand])
    col, thr, imp = kernels.scan_splits(sub, y, n_classes)
    if col < 0:
        return None
    parent = _canonical_impurity(np.bincount(y, minlength=n_classes))
    if not imp < parent:
        return None
    return cand[col], float(thr), float(imp)


# --------------------------------------------------------------------------
# Trees
# --------------------------------------------------------------------------

@dataclass(eq=False)
class Tree:
    """Array-encoded binary tree. feature[i] == -1 marks node i as a leaf;
    split nodes send value <= threshold to left, else right. counts holds
    the training class counts seen at every node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    batch_id: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def leaf_class(self) -> np.ndarray:
        return np.argmax(self.counts, axis=1)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index for each row."""
        return kernels.tree_apply(self.feature, self.threshold, self.left,
                                  self.right, np.ascontiguousarray(X, np.float64))


def _n_candidates(features_per_split, n_features: int) -> int:
    if features_per_split == "all":
        return n_features
    if features_per_split == "sqrt":
        return max(1, int(np.sqrt(n_features)))
    m = int(features_per_split)
    if not 1 <= m <= n_features:
        raise DataError(f"features_per_split {m} outside [1, {n_features}]")
    return m


def _grow_tree(X, y, n_classes, config, rng, batch_id) -> Tree:
    n_features = X.shape[1]
    m = _n_candidates(config.features_per_split, n_features)
    max_depth = config.max_depth if config.max_depth is not None else np.inf

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    # depth-first, left child processed first; right is pushed first (LIFO)
    stack = [(np.arange(len(y)), 0, -1, False)]
    while stack:
        rows, depth, parent, is_left = stack.pop()
        idx = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        node_counts = np.bincount(y[rows], minlength=n_classes)
        counts.append(node_counts)
        if parent >= 0:
            (left if is_left else right)[parent] = idx

        n = len(rows)
        if n < config.min_samples_split or depth >= max_depth:
            continue
        if node_counts.max() == n:  # pure
            continue
        if m < n_features:
            cand = np.sort(rng.choice(n_features, size=m, replace=False))
        else:
            cand = np.arange(n_features)
        sub = np.ascontiguousarray(X[np.ix_(rows, cand)])
        col, thr, imp = kernels.scan_splits(sub, y[rows], n_classes)
        if col < 0 or not imp < _canonical_impurity(node_counts):
            continue
        f = int(cand[col])
        feature[idx] = f
        threshold[idx] = float(thr)
        go_left = X[rows, f] <= thr
        stack.append((rows[~go_left], depth + 1, idx, False))
        stack.append((rows[go_left], depth + 1, idx, True))

    return Tree(
        feature=np.array(feature, np.int64),
        threshold=np.array(threshold, np.float64),
        left=np.array(left, np.int64),
        right=np.array(right, np.int64),
        counts=np.array(counts, np.int64),
        batch_id=batch_id,
    )


# --------------------------------------------------------------------------
# Forest
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = 16
    min_samples_split: int = 2
    features_per_split: str | int = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise DataError("max_depth must be positive or None")
        if self.min_samples_split < 1:
            raise DataError("min_samples_split must be positive")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ForestConfig":
        return cls(**doc)


@dataclass(eq=False)
class ForestModel:
    trees: tuple[Tree, ...]
    class_names: tuple[str, ...]
    n_features: int
    config: ForestConfig
    encoding: EncodingMap | None = None

    def __post_init__(self):
        for tree in self.trees:
            if tree.counts.shape[1] != len(self.class_names):
                raise DataError("tree class count disagrees with model classes")

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _grow_batch(X, y, n_classes, config, batch_id, n_trees) -> list[Tree]:
    X = np.ascontiguousarray(X, np.float64)
    y = np.asarray(y, np.int64)
    trees = []
    for ti in range(n_trees):
        rng = np.random.default_rng((config.seed, batch_id, ti))
        if config.bootstrap:
            pick = rng.integers(0, len(y), size=len(y))
        else:
            pick = np.arange(len(y))
        trees.append(_grow_tree(X[pick], y[pick], n_classes, config, rng, batch_id))
    return trees


def train(matrix: FeatureMatrix, config: ForestConfig) -> ForestModel:
    """Grow config.n_trees trees on seeded bootstrap samples of the matrix."""
    if matrix.rows == 0:
        raise DataError("cannot train on an empty matrix")
    if len(np.unique(matrix.labels)) < 2:
        raise DataError("training needs at least two classes present")
    if matrix.rows < config.min_samples_split:
        raise DataError("fewer rows than min_samples_split")
    _n_candidates(config.features_per_split, matrix.cols)  # validate early
    trees = _grow_batch(matrix.values, matrix.labels, len(matrix.class_names),
                        config, batch_id=0, n_trees=config.n_trees)
    return ForestModel(tuple(trees), matrix.class_names, matrix.cols, config)


def predict_batch(model: ForestModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Majority-vote labels and the (rows, classes) vote grid."""
    X = np.ascontiguousarray(X, np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(f"row width {X.shape[-1]} != model width {model.n_features}")
    n = X.shape[0]
    votes = np.zeros((n, len(model.class_names)), np.int64)
    rows = np.arange(n)
    for tree in model.trees:
        leaf = tree.apply(X)
        votes[rows, tree.leaf_class[leaf]] += 1
    return np.argmax(votes, axis=1), votes


def predict(model: ForestModel, row) -> tuple[str, np.ndarray]:
    """Predicted class name and per-class vote counts for one row."""
    arr = np.asarray(row, np.float64).reshape(1, -1)
    labels, votes = predict_batch(model, arr)
    return model.class_names[int(labels[0])], votes[0]


def extend(model: ForestModel, batch: FeatureMatrix, trees_per_batch: int) -> ForestModel:
    """Append trees trained on the batch under a fresh batch id; existing
    trees are untouched (the returned model is a new value)."""
    if trees_per_batch < 1:
        raise DataError("trees_per_batch must be positive")
    if batch.rows == 0:
        raise DataError("cannot extend with an empty batch")
    if batch.class_names != model.class_names:
        unknown = set(batch.class_names) - set(model.class_names)
        if unknown:
            raise DataError(f"batch has classes unknown to the model: {sorted(unknown)}")
        raise DataError("batch class order disagrees with the model")
    if batch.cols != model.n_features:
        raise DataError(f"batch width {batch.cols} != model width {model.n_features}")
    batch_id = max((t.batch_id for t in model.trees), default=-1) + 1
    new_trees = _grow_batch(batch.values, batch.labels, len(model.class_names),
                            model.config, batch_id, trees_per_batch)
    return ForestModel(model.trees + tuple(new_trees), model.class_names,
                       model.n_features, model.config, model.encoding)


def maybe_drop_batch(pending: list, max_pending: int, seed: int) -> list:
    """Shed seeded-uniformly-random elements until the queue fits."""
    if max_pending < 1:
        raise DataError("max_pending must be positive")
    out = list(pending)
    rng = np.random.default_rng(seed)
    while len(out) > max_pending:
        out.pop(int(rng.integers(0, len(out))))
    return out


# --------------------------------------------------------------------------
# Serialization (versioned text format; byte-stable for fixed inputs)
# --------------------------------------------------------------------------

FORMAT_NAME = "loghunter-forest"
FORMAT_VERSION = 1


def model_to_json(model: ForestModel) -> str:
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "seed": model.config.seed,
        "config": model.config.to_dict(),
        "class_names": list(model.class_names),
        "n_features": model.n_features,
        "encoding": json.loads(model.encoding.to_json()) if model.encoding else None,
        "trees": [
            {
                "batch_id": t.batch_id,
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "counts": t.counts.tolist(),
            }
            for t in model.trees
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def model_from_json(text: str) -> ForestModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from exc
    if doc.get("format") != FORMAT_NAME:
        raise DataError("not a forest model file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {doc.get('format_version')}")
    trees = tuple(
        Tree(
            feature=np.array(t["feature"], np.int64),
            threshold=np.array(t["threshold"], np.float64),
            left=np.array(t["left"], np.int64),
            right=np.array(t["right"], np.int64),
            counts=np.array(t["counts"], np.int64),
            batch_id=int(t["batch_id"]),
        )
        for t in doc["trees"]
    )
    encoding = None
    if doc.get("encoding") is not None:
        encoding = EncodingMap.from_json(json.dumps(doc["encoding"]))
    return ForestModel(
        trees=trees,
        class_names=tuple(doc["class_names"]),
        n_features=int(doc["n_features"]),
        config=ForestConfig.from_dict(doc["config"]),
        encoding=encoding,
    )


def save_model(path, model: ForestModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> ForestModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())


def with_seed(config: ForestConfig, seed: int) -> ForestConfig:
    return replace(config, seed=seed)
