"""Turning a LogTable into a pure-numeric feature matrix.

IPv4 addresses pack into a 32-bit value by concatenating the four octets
(o0*2^24 + o1*2^16 + o2*2^8 + o3). Categorical columns expand to one-hot
groups over categories learned at fit time. Timestamps become epoch seconds.
Everything widens to float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import DataError
from .schema import DatasetProfile, LogTable, make_table, validate_table


def ipv4_to_u32(text: str) -> int:
    """Pack a dotted-quad IPv4 string into an unsigned 32-bit integer."""
    parts = text.split(".")
    if len(parts) != 4:
        raise DataError(f"malformed IPv4 address {text!r}")
    octets = []
    for p in parts:
        if not p.isdigit():
            raise DataError(f"malformed IPv4 address {text!r}")
        o = int(p)
        if o > 255:
            raise DataError(f"IPv4 octet out of range in {text!r}")
        octets.append(o)
    return (octets[0] << 24) + (octets[1] << 16) + (octets[2] << 8) + octets[3]


def u32_to_ipv4(value: int) -> str:
    """Inverse of ipv4_to_u32 (reverse shifts)."""
    if not 0 <= value <= 0xFFFFFFFF:
        raise DataError(f"value {value} is not a 32-bit unsigned integer")
    return f"{(value >> 24) & 255}.{(value >> 16) & 255}.{(value >> 8) & 255}.{value & 255}"


def to_epoch(value) -> float:
    """Seconds since the Unix epoch; numeric input passes through.

    ISO-8601 text is parsed with a trailing-Z fix; naive timestamps are
    treated as UTC. Fractional seconds are preserved.
    """
    if isinstance(value, (int, float, np.integer, np.floating)):
        return float(value)
    text = str(value).strip()
    try:
        return float(text)
    except ValueError:
        pass
    iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    try:
        dt = datetime.fromisoformat(iso)
    except ValueError as exc:
        raise DataError(f"unparseable timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def epoch_to_iso(epoch: float) -> str:
    dt = datetime.fromtimestamp(epoch, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"


def one_hot(values, categories: list[str]) -> tuple[list[np.ndarray], int]:
    """Indicator vectors for each category, plus the unknown-value count.

    Rows whose value is not a known category encode as all zeros.
    """
    if len(set(categories)) != len(categories):
        raise DataError("one-hot categories must be duplicate-free")
    pos = {c: i for i, c in enumerate(categories)}
    n = len(values)
    group = np.zeros((n, len(categories)), np.float64)
    unknown = 0
    for i, v in enumerate(values):
        j = pos.get(v)
        if j is None:
            unknown += 1
        else:
            group[i, j] = 1.0
    return [group[:, j].copy() for j in range(len(categories))], unknown


# --------------------------------------------------------------------------
# Table-level encoding
# --------------------------------------------------------------------------

ACTIONS = ("pass_float", "ipv4_pack", "epoch", "one_hot", "bool_to_float")


@dataclass(frozen=True)
class ColumnPlan:
    column: str
    action: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise DataError(f"unknown encoding action {self.action!r}")
        if self.action == "one_hot":
            cats = list(self.categories)
            if cats != sorted(cats) or len(set(cats)) != len(cats):
                raise DataError(f"one-hot categories for {self.column!r} must be "
                                "sorted and duplicate-free")


@dataclass(frozen=True)
class EncodingMap:
    plans: tuple[ColumnPlan, ...]
    feature_names: tuple[str, ...]

    def to_json(self) -> str:
        doc = {
            "plans": [
                {"column": p.column, "action": p.action,
                 **({"categories": list(p.categories)} if p.action == "one_hot" else {})}
                for p in self.plans
            ],
            "feature_names": list(self.feature_names),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EncodingMap":
        doc = json.loads(text)
        plans = tuple(
            ColumnPlan(p["column"], p["action"], tuple(p.get("categories", ())))
            for p in doc["plans"]
        )
        return cls(plans, tuple(doc["feature_names"]))


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Row-major float64 features with class labels. Never holds NaN/Inf."""

    values: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...]

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "FeatureMatrix":
        return FeatureMatrix(
            np.ascontiguousarray(self.values[indices]),
            self.labels[indices].copy(),
            self.class_names,
            self.feature_names,
        )


def matrices_equal(a: FeatureMatrix, b: FeatureMatrix) -> bool:
    return (
        a.class_names == b.class_names
        and a.feature_names == b.feature_names
        and np.array_equal(a.labels, b.labels)
        and np.array_equal(a.values, b.values)
    )


@dataclass
class EncodeReport:
    missing_numeric: int = 0
    unknown_categories: dict[str, int] = field(default_factory=dict)


def _plan_for(spec) -> str:
    return {
        "numeric": "pass_float",
        "ipv4": "ipv4_pack",
        "timestamp": "epoch",
        "categorical": "one_hot",
        "boolean": "bool_to_float",
    }[spec.kind]


def fit_encoding(table: LogTable, profile: DatasetProfile) -> EncodingMap:
    """Build the table's encoding plan; one-hot categories are collected
    from the table (sorted) and frozen."""
    plans = []
    names: list[str] = []
    for spec in table.specs:
        action = _plan_for(spec)
        if action == "one_hot":
            cats = tuple(sorted(set(str(v) for v in table.column(spec.name))))
            plans.append(ColumnPlan(spec.name, action, cats))
            names.extend(f"{spec.name}={c}" for c in cats)
        else:
            plans.append(ColumnPlan(spec.name, action))
            names.append(spec.name)
    return EncodingMap(tuple(plans), tuple(names))


def encode_with_map(table: LogTable, emap: EncodingMap) -> tuple[FeatureMatrix, EncodeReport]:
    """Encode a table with a frozen map (used at predict/stream time).

    Unseen categories encode as all-zero groups; missing numerics as 0.0.
    Both are counted in the report. Any remaining NaN/Inf rejects the rows.
    """
    report = EncodeReport()
    out_cols: list[np.ndarray] = []
    have = {spec.name for spec in table.specs}
    for plan in emap.plans:
        if plan.column not in have:
            raise DataError(f"table lacks column {plan.column!r} required by encoding")
        vec = table.column(plan.column)
        if plan.action == "pass_float":
            col = np.asarray(vec, np.float64).copy()
            nan_mask = np.isnan(col)
            if nan_mask.any():
                report.missing_numeric += int(nan_mask.sum())
                col[nan_mask] = 0.0
            out_cols.append(col)
        elif plan.action == "bool_to_float":
            out_cols.append(np.asarray(vec, np.float64))
        elif plan.action == "ipv4_pack":
            out_cols.append(np.array([float(ipv4_to_u32(str(v))) for v in vec]))
        elif plan.action == "epoch":
            out_cols.append(np.array([to_epoch(v) for v in vec], np.float64))
        elif plan.action == "one_hot":
            group, unknown = one_hot([str(v) for v in vec], list(plan.categories))
            if unknown:
                report.unknown_categories[plan.column] = unknown
            out_cols.extend(group)

    n = table.row_count
    width = len(emap.feature_names)
    values = np.empty((n, width), np.float64, order="C")
    for j, col in enumerate(out_cols):
        values[:, j] = col
    bad = ~np.isfinite(values)
    if bad.any():
        rows = sorted(set(np.nonzero(bad)[0].tolist()))
        raise DataError(f"non-finite feature values at rows {rows[:10]}")
    matrix = FeatureMatrix(values, table.labels.copy(), tuple(table.class_names),
                           emap.feature_names)
    return matrix, report


def encode_table(table: LogTable, profile: DatasetProfile) -> tuple[FeatureMatrix, EncodingMap]:
    """Fit an encoding on the table and apply it.

    The table may carry a subset of the profile's columns (cropped sources),
    but any column it shares with the profile must match the profile's spec.
    """
    check = validate_table(table, profile)
    if check.type_mismatches:
        col, want, got = check.type_mismatches[0]
        raise DataError(f"column {col!r} is {got}, profile expects {want}")
    profile_cols = {c.name for c in profile.columns}
    for spec in table.specs:
        if spec.name not in profile_cols:
            raise DataError(f"table column {spec.name!r} not in profile {profile.name!r}")
    emap = fit_encoding(table, profile)
    matrix, _ = encode_with_map(table, emap)
    return matrix, emap


# --------------------------------------------------------------------------
# Binary amalgamation
# --------------------------------------------------------------------------

BINARY_CLASSES = ("Benign", "Malicious")


def amalgamate_binary(table: LogTable, benign_names: list[str]) -> LogTable:
    """Collapse every non-benign class into a single Malicious class.

    Output classes are exactly ("Benign", "Malicious"); row count and benign
    rows are preserved.
    """
    if not benign_names:
        raise DataError("benign_names must not be empty")
    for name in benign_names:
        if name not in table.class_names:
            raise DataError(f"unknown benign class {name!r}")
    benign_idx = {table.class_names.index(n) for n in benign_names}
    is_benign = np.isin(table.labels, list(benign_idx))
    labels = np.where(is_benign, 0, 1).astype(np.int64)
    return make_table(table.specs, [v.copy() for v in table.values], labels, BINARY_CLASSES)
