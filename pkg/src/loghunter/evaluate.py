"""Train/test splitting, confusion matrices, per-class and macro metrics,
and the repeated random-holdout protocol."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._version import __version__
from .balance import BalancePlan, apply_plan, remove_small_classes
from .encode import FeatureMatrix
from .errors import DataError
from .forest import ForestConfig, predict_batch, train, with_seed


@dataclass(eq=False)
class ConfusionMatrix:
    """counts[i][j] = rows with true class i predicted as class j."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        total = self.total
        return float(np.trace(self.counts) / total) if total else 0.0


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass
class EvaluationReport:
    matrix: ConfusionMatrix
    per_class: list[ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    seed: int
    split_ratio: float
    n_runs: int | None = None
    accuracy_std: float | None = None
    run_accuracies: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        doc = {
            "tool_version": __version__,
            "class_names": list(self.matrix.class_names),
            "matrix": self.matrix.counts.tolist(),
            "per_class": [
                {"precision": m.precision, "recall": m.recall, "f1": m.f1}
                for m in self.per_class
            ],
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "accuracy": self.accuracy,
            "seed": self.seed,
            "split_ratio": self.split_ratio,
        }
        if self.n_runs is not None:
            doc["n_runs"] = self.n_runs
            doc["accuracy_std"] = self.accuracy_std
            doc["run_accuracies"] = self.run_accuracies
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def to_text(self) -> str:
        return render_text_grid(self)


def split_train_test(matrix: FeatureMatrix, train_fraction: float, seed: int,
                     stratified: bool = True) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Disjoint, exhaustive split with exactly floor(fraction * n) train rows.

    Stratified mode keeps per-class proportions within one row of exact,
    topping up per-class floors by largest fractional remainder.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly between 0 and 1")
    n = matrix.rows
    n_train = int(np.floor(train_fraction * n))
    rng = np.random.default_rng((seed, 0))
    if not stratified:
        perm = rng.permutation(n)
        return matrix.take(perm[:n_train]), matrix.take(perm[n_train:])

    class_rows = []
    for ci in range(len(matrix.class_names)):
        rows = np.nonzero(matrix.labels == ci)[0]
        if len(rows) == 1:
            raise DataError(
                f"class {matrix.class_names[ci]!r} has a single row; "
                "stratified split undefined"
            )
        class_rows.append(rows)

    quotas = [int(np.floor(train_fraction * len(rows))) for rows in class_rows]
    remainders = [train_fraction * len(rows) - q for rows, q in zip(class_rows, quotas)]
    deficit = n_train - sum(quotas)
    order = sorted(range(len(class_rows)), key=lambda ci: (-remainders[ci], ci))
    for ci in order:
        if deficit <= 0:
            break
        if quotas[ci] < len(class_rows[ci]):
            quotas[ci] += 1
            deficit -= 1

    train_idx = []
    test_idx = []
    for ci, rows in enumerate(class_rows):
        if len(rows) == 0:
            continue
        perm = rows[rng.permutation(len(rows))]
        train_idx.append(perm[: quotas[ci]])
        test_idx.append(perm[quotas[ci]:])
    train_all = np.concatenate(train_idx) if train_idx else np.empty(0, np.int64)
    test_all = np.concatenate(test_idx) if test_idx else np.empty(0, np.int64)
    return matrix.take(train_all), matrix.take(test_all)


def confusion_matrix(y_true, y_pred, n_classes: int,
                     class_names=None) -> ConfusionMatrix:
    y_true = np.asarray(y_true, np.int64)
    y_pred = np.asarray(y_pred, np.int64)
    if y_true.shape != y_pred.shape:
        raise DataError("true/pred vectors differ in length")
    counts = np.zeros((n_classes, n_classes), np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    if class_names is None:
        class_names = tuple(f"class_{i}" for i in range(n_classes))
    return ConfusionMatrix(counts, tuple(class_names))


def metrics(matrix: ConfusionMatrix, seed: int = 0,
            split_ratio: float = 0.0) -> EvaluationReport:
    """Per-class precision/recall/F1 plus unweighted macro averages.

    Zero-denominator cells resolve to 0 so macro stays defined.
    """
    counts = matrix.counts
    if counts.sum() <= 0:
        raise DataError("metrics need a non-empty confusion matrix")
    diag = np.diag(counts).astype(np.float64)
    col = counts.sum(axis=0).astype(np.float64)
    row = counts.sum(axis=1).astype(np.float64)
    per_class = []
    for i in range(len(diag)):
        precision = diag[i] / col[i] if col[i] > 0 else 0.0
        recall = diag[i] / row[i] if row[i] > 0 else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if (precision + recall) > 0 else 0.0)
        per_class.append(ClassMetrics(float(precision), float(recall), float(f1)))
    return EvaluationReport(
        matrix=matrix,
        per_class=per_class,
        macro_precision=float(np.mean([m.precision for m in per_class])),
        macro_recall=float(np.mean([m.recall for m in per_class])),
        macro_f1=float(np.mean([m.f1 for m in per_class])),
        accuracy=matrix.accuracy,
        seed=seed,
        split_ratio=split_ratio,
    )


def evaluate_model(model, test: FeatureMatrix, seed: int = 0,
                   split_ratio: float = 0.0) -> EvaluationReport:
    pred, _ = predict_batch(model, test.values)
    cm = confusion_matrix(test.labels, pred, len(test.class_names), test.class_names)
    return metrics(cm, seed=seed, split_ratio=split_ratio)


def _run_seeds(base_seed: int, run: int) -> tuple[int, int]:
    state = np.random.SeedSequence([base_seed, run]).generate_state(2)
    return int(state[0]), int(state[1])


def repeated_holdout(matrix: FeatureMatrix, forest_config: ForestConfig,
                     n_runs: int, train_fraction: float, base_seed: int,
                     stratified: bool = True, plan: BalancePlan | None = None,
                     rebalance_per_split: bool = False,
                     ) -> tuple[float, float, list[EvaluationReport]]:
    """Re-run split -> (optional balance) -> train -> score n_runs times.

    Run i derives its split and forest seeds from (base_seed, i). When a
    plan is given, small-class removal always happens once at dataset level
    (a per-partition removal would desynchronize the class index space);
    rebalance_per_split=True then resamples each run's training partition,
    False resamples the whole matrix once up front.
    """
    if n_runs < 1:
        raise DataError("n_runs must be at least 1")
    if plan is not None:
        matrix, _ = remove_small_classes(matrix, plan.min_class_size)
        if not rebalance_per_split:
            matrix, _ = apply_plan(matrix, plan.without_removal())
    reports = []
    for run in range(n_runs):
        split_seed, tree_seed = _run_seeds(base_seed, run)
        tr, te = split_train_test(matrix, train_fraction, split_seed, stratified)
        if plan is not None and rebalance_per_split:
            tr, _ = apply_plan(tr, plan.without_removal().with_seed(split_seed))
        model = train(tr, with_seed(forest_config, tree_seed))
        reports.append(evaluate_model(model, te, seed=split_seed,
                                      split_ratio=train_fraction))
    accs = np.array([r.accuracy for r in reports])
    return float(accs.mean()), float(accs.std()), reports


def aggregate_report(reports: list[EvaluationReport], base_seed: int,
                     split_ratio: float) -> EvaluationReport:
    """Sum per-run confusion matrices into one report; accuracy is the
    unweighted mean of per-run accuracies (test sizes are equal)."""
    if not reports:
        raise DataError("no reports to aggregate")
    total = reports[0].matrix.counts.copy()
    for r in reports[1:]:
        total += r.matrix.counts
    accs = [r.accuracy for r in reports]
    agg = metrics(ConfusionMatrix(total, reports[0].matrix.class_names),
                  seed=base_seed, split_ratio=split_ratio)
    agg.accuracy = float(np.mean(accs))
    agg.n_runs = len(reports)
    agg.accuracy_std = float(np.std(accs))
    agg.run_accuracies = [float(a) for a in accs]
    return agg


def render_text_grid(report: EvaluationReport) -> str:
    """Aligned text grid: counts with row-normalized percentages, then the
    per-class and macro metric block."""
    names = list(report.matrix.class_names)
    counts = report.matrix.counts
    label_w = max([len(n) for n in names] + [4])
    cells = []
    for i in range(len(names)):
        row_total = counts[i].sum()
        row = []
        for j in range(len(names)):
            pct = (100.0 * counts[i, j] / row_total) if row_total else 0.0
            row.append(f"{counts[i, j]} ({pct:.1f}%)")
        cells.append(row)
    col_w = [
        max([len(cells[i][j]) for i in range(len(names))] + [len(names[j]), 6])
        for j in range(len(names))
    ]
    lines = ["true \\ predicted".ljust(label_w + 2)
             + "  ".join(names[j].rjust(col_w[j]) for j in range(len(names)))]
    for i, name in enumerate(names):
        lines.append(name.ljust(label_w + 2)
                     + "  ".join(cells[i][j].rjust(col_w[j]) for j in range(len(names))))
    lines.append("")
    lines.append(f"{'class'.ljust(label_w)}  precision  recall      f1")
    for name, m in zip(names, report.per_class):
        lines.append(f"{name.ljust(label_w)}  {m.precision:9.4f}  {m.recall:6.4f}  {m.f1:6.4f}")
    lines.append(f"{'macro'.ljust(label_w)}  {report.macro_precision:9.4f}  "
                 f"{report.macro_recall:6.4f}  {report.macro_f1:6.4f}")
    lines.append("")
    lines.append(f"accuracy {report.accuracy:.6f}   seed {report.seed}   "
                 f"split {report.split_ratio}")
    if report.n_runs is not None:
        lines.append(f"runs {report.n_runs}   accuracy std {report.accuracy_std:.6f}")
    return "\n".join(lines) + "\n"
