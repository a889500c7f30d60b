"""Columnar data model: column specs, dataset profiles, class registry, LogTable."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

KINDS = ("numeric", "categorical", "ipv4", "timestamp", "boolean")
STORAGES = ("int64", "float64", "text", "bool")

TACTIC_PATTERN = re.compile(r"^T\d{4}(\.\d{3})?$")
# benign classes carry "Desired traffic"; amalgamated attack groups carry "Amalgamated"
SENTINEL_TACTICS = ("Desired traffic", "Amalgamated")

_STORAGE_DTYPE = {
    "int64": np.int64,
    "float64": np.float64,
    "text": np.object_,
    "bool": np.bool_,
}


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    storage: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if self.storage not in STORAGES:
            raise DataError(f"unknown storage {self.storage!r} for {self.name!r}")
        if self.kind == "ipv4" and self.storage != "text":
            raise DataError(f"ipv4 column {self.name!r} must use text storage on ingest")
        if self.kind == "timestamp" and self.storage not in ("text", "float64"):
            raise DataError(f"timestamp column {self.name!r} must use text or float64 storage")


@dataclass(frozen=True)
class ClassEntry:
    name: str
    tactics: tuple[str, ...]

    def __post_init__(self):
        for t in self.tactics:
            if t not in SENTINEL_TACTICS and not TACTIC_PATTERN.match(t):
                raise DataError(f"tactic label {t!r} for class {self.name!r} is malformed")


@dataclass(frozen=True)
class ClassRegistry:
    entries: tuple[ClassEntry, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise DataError("duplicate class names in registry")

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def tactics_for(self, class_name: str) -> tuple[str, ...]:
        for e in self.entries:
            if e.name == class_name:
                return e.tactics
        raise KeyError(class_name)

    def benign_names(self) -> list[str]:
        return [e.name for e in self.entries if "Desired traffic" in e.tactics]


@dataclass(frozen=True)
class DatasetProfile:
    name: str
    columns: tuple[ColumnSpec, ...]
    label_column: str
    classes: ClassRegistry

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError(f"profile {self.name!r} has duplicate column names")
        if self.label_column in names:
            raise DataError(f"label column {self.label_column!r} must not be a feature column")
        if not self.columns:
            raise DataError(f"profile {self.name!r} needs at least one feature column")

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class LogTable:
    """Columnar table: one typed vector per feature column plus class labels.

    Immutable after construction; vectors are marked read-only so the table
    can be shared across workers.
    """

    specs: tuple[ColumnSpec, ...]
    values: tuple[np.ndarray, ...]
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        if len(self.specs) != len(self.values):
            raise DataError("specs and value vectors differ in count")
        n = len(self.labels)
        for spec, vec in zip(self.specs, self.values):
            if len(vec) != n:
                raise DataError(f"column {spec.name!r} has {len(vec)} rows, labels have {n}")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise DataError("label index outside class_names")
        for vec in self.values:
            vec.flags.writeable = False
        self.labels.flags.writeable = False

    @property
    def row_count(self) -> int:
        return len(self.labels)

    def column(self, name: str) -> np.ndarray:
        for spec, vec in zip(self.specs, self.values):
            if spec.name == name:
                return vec
        raise KeyError(name)

    def take(self, indices: np.ndarray) -> "LogTable":
        """Row subset/reorder; class list is preserved."""
        return LogTable(
            specs=self.specs,
            values=tuple(vec[indices].copy() for vec in self.values),
            labels=self.labels[indices].copy(),
            class_names=self.class_names,
        )


def make_table(specs, columns, labels, class_names) -> LogTable:
    """Build a LogTable from python-level columns, coercing storage dtypes."""
    specs = tuple(specs)
    vecs = []
    for spec, col in zip(specs, columns):
        arr = np.asarray(col, dtype=_STORAGE_DTYPE[spec.storage])
        vecs.append(arr)
    return LogTable(
        specs=specs,
        values=tuple(vecs),
        labels=np.asarray(labels, dtype=np.int64),
        class_names=tuple(class_names),
    )


def tables_equal(a: LogTable, b: LogTable) -> bool:
    """Structural equality; NaNs compare equal so float round-trips work."""
    if a.specs != b.specs or a.class_names != b.class_names:
        return False
    if not np.array_equal(a.labels, b.labels):
        return False
    for spec, va, vb in zip(a.specs, a.values, b.values):
        if spec.storage == "float64":
            if not np.array_equal(va, vb, equal_nan=True):
                return False
        elif not np.array_equal(va, vb):
            return False
    return True


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

@dataclass
class ValidationReport:
    missing_columns: list[str] = field(default_factory=list)
    type_mismatches: list[tuple[str, str, str]] = field(default_factory=list)
    unknown_classes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing_columns or self.type_mismatches or self.unknown_classes)


def validate_table(table: LogTable, profile: DatasetProfile) -> ValidationReport:
    """Report missing columns, kind/storage mismatches, and unregistered classes."""
    report = ValidationReport()
    have = {spec.name: spec for spec in table.specs}
    for spec in profile.columns:
        got = have.get(spec.name)
        if got is None:
            report.missing_columns.append(spec.name)
        elif got != spec:
            report.type_mismatches.append(
                (spec.name, f"{spec.kind}/{spec.storage}", f"{got.kind}/{got.storage}")
            )
    registered = set(profile.classes.names)
    for name in table.class_names:
        if name not in registered:
            report.unknown_classes.append(name)
    return report


def class_histogram(table: LogTable) -> list[tuple[str, int]]:
    """Per-class row counts, descending by count, ties by name; zeros included."""
    counts = np.bincount(table.labels, minlength=len(table.class_names))
    pairs = [(name, int(c)) for name, c in zip(table.class_names, counts)]
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return pairs


# --------------------------------------------------------------------------
# Profile config format (JSON text)
# --------------------------------------------------------------------------

def profile_to_json(profile: DatasetProfile) -> str:
    doc = {
        "name": profile.name,
        "columns": [
            {"name": c.name, "kind": c.kind, "storage": c.storage} for c in profile.columns
        ],
        "label_column": profile.label_column,
        "classes": [
            {"name": e.name, "tactics": list(e.tactics)} for e in profile.classes.entries
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def profile_from_json(text: str) -> DatasetProfile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"profile config is not valid JSON: {exc}") from exc
    try:
        columns = tuple(
            ColumnSpec(c["name"], c["kind"], c["storage"]) for c in doc["columns"]
        )
        registry = ClassRegistry(
            tuple(ClassEntry(e["name"], tuple(e["tactics"])) for e in doc["classes"])
        )
        return DatasetProfile(doc["name"], columns, doc["label_column"], registry)
    except KeyError as exc:
        raise DataError(f"profile config missing field: {exc}") from exc


def load_profile(path) -> DatasetProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return profile_from_json(fh.read())
