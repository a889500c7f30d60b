"""Class rebalancing: singleton removal, undersampling, duplication
oversampling, and synthetic interpolation oversampling, driven by an
explicit per-class target plan.

Stage order is fixed: removal -> undersample -> oversample -> smote. Every
class resamples from its own RNG stream derived from (seed, stage, class
index), so per-class work is order-independent and reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import kernels
from .encode import FeatureMatrix
from .errors import DataError
from .schema import LogTable

_UNDER, _OVER, _SMOTE = 0, 1, 2


@dataclass(frozen=True)
class BalancePlan:
    min_class_size: int = 2
    under_targets: dict[str, int] = field(default_factory=dict)
    over_targets: dict[str, int] = field(default_factory=dict)
    smote_targets: dict[str, int] = field(default_factory=dict)
    smote_k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.min_class_size < 1:
            raise DataError("min_class_size must be positive")
        if self.smote_k < 1:
            raise DataError("smote_k must be positive")
        for name, under in self.under_targets.items():
            over = self.over_targets.get(name)
            if over is not None and over < under:
                raise DataError(f"{name!r}: oversample target below undersample target")
        for name, over in self.over_targets.items():
            smote = self.smote_targets.get(name)
            if smote is not None and smote < over:
                raise DataError(f"{name!r}: smote target below oversample target")

    def with_seed(self, seed: int) -> "BalancePlan":
        return BalancePlan(self.min_class_size, dict(self.under_targets),
                           dict(self.over_targets), dict(self.smote_targets),
                           self.smote_k, seed)

    def without_removal(self) -> "BalancePlan":
        """Resampling stages only. Class removal is a dataset-level step;
        when balancing one partition of a split dataset it must be skipped
        so the class index space stays aligned with the other partition."""
        return BalancePlan(1, dict(self.under_targets), dict(self.over_targets),
                           dict(self.smote_targets), self.smote_k, self.seed)


@dataclass
class BalanceTrace:
    initial: list[tuple[str, int]]
    after_removal: list[tuple[str, int]] = field(default_factory=list)
    after_under: list[tuple[str, int]] = field(default_factory=list)
    after_over: list[tuple[str, int]] = field(default_factory=list)
    after_smote: list[tuple[str, int]] = field(default_factory=list)
    removed_classes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "initial": [list(p) for p in self.initial],
            "after_removal": [list(p) for p in self.after_removal],
            "after_under": [list(p) for p in self.after_under],
            "after_over": [list(p) for p in self.after_over],
            "after_smote": [list(p) for p in self.after_smote],
            "removed_classes": list(self.removed_classes),
        }


def matrix_histogram(matrix) -> list[tuple[str, int]]:
    """Per-class counts of a FeatureMatrix (or anything with labels and
    class_names), descending by count, ties by name."""
    counts = np.bincount(matrix.labels, minlength=len(matrix.class_names))
    pairs = [(name, int(c)) for name, c in zip(matrix.class_names, counts)]
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return pairs


def _histogram(labels: np.ndarray, class_names) -> list[tuple[str, int]]:
    counts = np.bincount(labels, minlength=len(class_names))
    pairs = [(name, int(c)) for name, c in zip(class_names, counts)]
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return pairs


# --------------------------------------------------------------------------
# Removal
# --------------------------------------------------------------------------

def remove_small_classes(data, min_class_size: int):
    """Drop classes with fewer than min_class_size rows; compact class indices.

    Works on a LogTable or a FeatureMatrix; returns (same type, removed names).
    """
    labels = data.labels
    class_names = list(data.class_names)
    counts = np.bincount(labels, minlength=len(class_names))
    keep_classes = [i for i, c in enumerate(counts) if c >= min_class_size]
    removed = [class_names[i] for i in range(len(class_names)) if i not in set(keep_classes)]
    if not keep_classes:
        raise DataError("min_class_size removed every class")
    if not removed:
        return data, []
    remap = {old: new for new, old in enumerate(keep_classes)}
    row_mask = np.isin(labels, keep_classes)
    new_labels = np.array([remap[v] for v in labels[row_mask]], np.int64)
    kept_names = tuple(class_names[i] for i in keep_classes)

    if isinstance(data, LogTable):
        out = LogTable(
            specs=data.specs,
            values=tuple(vec[row_mask].copy() for vec in data.values),
            labels=new_labels,
            class_names=kept_names,
        )
    elif isinstance(data, FeatureMatrix):
        out = FeatureMatrix(
            np.ascontiguousarray(data.values[row_mask]),
            new_labels,
            kept_names,
            data.feature_names,
        )
    else:
        raise TypeError(f"cannot remove classes from {type(data).__name__}")
    return out, removed


# --------------------------------------------------------------------------
# Resampling stages (FeatureMatrix)
# --------------------------------------------------------------------------

def _class_indices(labels: np.ndarray, class_names, targets: dict[str, int]):
    name_to_idx = {n: i for i, n in enumerate(class_names)}
    for name in targets:
        if name not in name_to_idx:
            raise DataError(f"plan targets unknown class {name!r}")
    return name_to_idx


def undersample(matrix: FeatureMatrix, targets: dict[str, int], seed: int) -> FeatureMatrix:
    """Shrink targeted classes to exact counts via a seeded uniform subset
    (without replacement). Untargeted classes pass through untouched."""
    name_to_idx = _class_indices(matrix.labels, matrix.class_names, targets)
    keep = np.ones(matrix.rows, bool)
    for name, target in targets.items():
        ci = name_to_idx[name]
        rows = np.nonzero(matrix.labels == ci)[0]
        if target > len(rows):
            raise DataError(f"{name!r}: undersample target {target} exceeds count {len(rows)}")
        rng = np.random.default_rng((seed, _UNDER, ci))
        chosen = rng.choice(len(rows), size=target, replace=False)
        drop = np.ones(len(rows), bool)
        drop[chosen] = False
        keep[rows[drop]] = False
    return matrix.take(np.nonzero(keep)[0])


def random_oversample(matrix: FeatureMatrix, targets: dict[str, int], seed: int) -> FeatureMatrix:
    """Grow targeted classes to exact counts by duplicating seeded uniform
    picks (with replacement). Duplicates append after the original rows."""
    name_to_idx = _class_indices(matrix.labels, matrix.class_names, targets)
    extra_rows = []
    extra_labels = []
    for ci in range(len(matrix.class_names)):
        name = matrix.class_names[ci]
        if name not in targets:
            continue
        target = targets[name]
        rows = np.nonzero(matrix.labels == ci)[0]
        if target < len(rows):
            raise DataError(f"{name!r}: oversample target {target} below count {len(rows)}")
        n_new = target - len(rows)
        if n_new == 0:
            continue
        rng = np.random.default_rng((seed, _OVER, ci))
        picks = rows[rng.integers(0, len(rows), size=n_new)]
        extra_rows.append(matrix.values[picks])
        extra_labels.append(np.full(n_new, ci, np.int64))
    if not extra_rows:
        return matrix
    values = np.ascontiguousarray(np.vstack([matrix.values] + extra_rows))
    labels = np.concatenate([matrix.labels] + extra_labels)
    return FeatureMatrix(values, labels, matrix.class_names, matrix.feature_names)


def smote(matrix: FeatureMatrix, targets: dict[str, int], k: int, seed: int,
          ) -> tuple[FeatureMatrix, np.ndarray]:
    """Grow targeted classes to exact counts with interpolated synthetic rows.

    Each synthetic row picks a seeded-random class member x, one of its k
    nearest same-class neighbors x' (Euclidean; self excluded; k clamps to
    class size - 1), and emits x + u*(x' - x) with u uniform in [0, 1].

    Returns (matrix, parents): parents[i] holds the (x, x') row indices into
    the *input* matrix for the i-th appended synthetic row, so the segment
    identity is checkable.
    """
    if k < 1:
        raise DataError("smote k must be positive")
    name_to_idx = _class_indices(matrix.labels, matrix.class_names, targets)
    synth_rows = []
    synth_labels = []
    parent_pairs = []
    for ci in range(len(matrix.class_names)):
        name = matrix.class_names[ci]
        if name not in targets:
            continue
        target = targets[name]
        rows = np.nonzero(matrix.labels == ci)[0]
        cur = len(rows)
        if target < cur:
            raise DataError(f"{name!r}: smote target {target} below count {cur}")
        n_new = target - cur
        if n_new == 0:
            continue
        if cur < 2:
            raise DataError(f"{name!r}: smote needs at least 2 rows, has {cur}")
        members = np.ascontiguousarray(matrix.values[rows])
        dists = kernels.sq_dists(members, members)
        np.fill_diagonal(dists, np.inf)
        k_eff = min(k, cur - 1)
        # stable argsort: distance ties resolve to the lower member index
        neighbor_table = np.argsort(dists, axis=1, kind="stable")[:, :k_eff]

        rng = np.random.default_rng((seed, _SMOTE, ci))
        base = rng.integers(0, cur, size=n_new)
        pick = rng.integers(0, k_eff, size=n_new)
        u = rng.random(size=n_new)
        neighbor = neighbor_table[base, pick]
        x = members[base]
        x2 = members[neighbor]
        synth_rows.append(x + u[:, None] * (x2 - x))
        synth_labels.append(np.full(n_new, ci, np.int64))
        parent_pairs.append(np.column_stack([rows[base], rows[neighbor]]))
    if not synth_rows:
        return matrix, np.empty((0, 2), np.int64)
    values = np.ascontiguousarray(np.vstack([matrix.values] + synth_rows))
    labels = np.concatenate([matrix.labels] + synth_labels)
    parents = np.vstack(parent_pairs).astype(np.int64)
    out = FeatureMatrix(values, labels, matrix.class_names, matrix.feature_names)
    return out, parents


def apply_plan(matrix: FeatureMatrix, plan: BalancePlan) -> tuple[FeatureMatrix, BalanceTrace]:
    """Run removal, undersample, oversample, and smote in their fixed order."""
    trace = BalanceTrace(initial=_histogram(matrix.labels, matrix.class_names))
    matrix, removed = remove_small_classes(matrix, plan.min_class_size)
    trace.removed_classes = removed
    trace.after_removal = _histogram(matrix.labels, matrix.class_names)

    matrix = undersample(matrix, plan.under_targets, plan.seed)
    trace.after_under = _histogram(matrix.labels, matrix.class_names)

    matrix = random_oversample(matrix, plan.over_targets, plan.seed)
    trace.after_over = _histogram(matrix.labels, matrix.class_names)

    matrix, _ = smote(matrix, plan.smote_targets, plan.smote_k, plan.seed)
    trace.after_smote = _histogram(matrix.labels, matrix.class_names)
    return matrix, trace


# --------------------------------------------------------------------------
# Plan files
# --------------------------------------------------------------------------

def plan_to_json(plan: BalancePlan) -> str:
    doc = {
        "min_class_size": plan.min_class_size,
        "smote_k": plan.smote_k,
        "seed": plan.seed,
        "undersample": plan.under_targets,
        "oversample": plan.over_targets,
        "smote": plan.smote_targets,
    }
    return json.dumps(doc, indent=2) + "\n"


def plan_from_json(text: str) -> BalancePlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"plan file is not valid JSON: {exc}") from exc
    return BalancePlan(
        min_class_size=int(doc.get("min_class_size", 2)),
        under_targets={k: int(v) for k, v in doc.get("undersample", {}).items()},
        over_targets={k: int(v) for k, v in doc.get("oversample", {}).items()},
        smote_targets={k: int(v) for k, v in doc.get("smote", {}).items()},
        smote_k=int(doc.get("smote_k", 5)),
        seed=int(doc.get("seed", 0)),
    )


def load_plan(path) -> BalancePlan:
    with open(path, "r", encoding="utf-8") as fh:
        return plan_from_json(fh.read())


def builtin_plan(name: str) -> BalancePlan:
    """Shipped golden plans: 'uwf2022' or 'cicids2017'."""
    ref = resources.files("loghunter").joinpath(f"plans/{name}.plan")
    try:
        return plan_from_json(ref.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise KeyError(name)
