"""Reading, writing, collating, and synthesizing log tables."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SchemaMismatchError, UnsupportedFormatError
from .schema import ColumnSpec, DatasetProfile, LogTable, make_table

_TRUE = {"true", "t", "1", "yes"}
_FALSE = {"false", "f", "0", "no"}


@dataclass
class IngestReport:
    """Rows dropped during parsing, by reason."""

    skipped_rows: int = 0
    reasons: dict[str, int] = field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skipped_rows += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1


class _RowSkip(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def _parse_cell(text: str, spec: ColumnSpec):
    if spec.storage == "int64":
        try:
            return int(text)
        except ValueError:
            raise _RowSkip(f"bad int in {spec.name}")
    if spec.storage == "float64":
        if text == "":
            return math.nan  # missing; encoder maps to 0.0 with a count
        try:
            return float(text)
        except ValueError:
            raise _RowSkip(f"bad float in {spec.name}")
    if spec.storage == "bool":
        low = text.strip().lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise _RowSkip(f"bad bool in {spec.name}")
    return text


def _label_to_index(raw, class_names: list[str]) -> int:
    """Normalize a label cell (class name or integer code) to a class index.

    Unknown class names extend the table's class list so validation can
    report them later; integer codes outside the registry drop the row.
    """
    if isinstance(raw, str):
        text = raw.strip()
        try:
            code = int(text)
        except ValueError:
            if text == "":
                raise _RowSkip("missing label")
            if text not in class_names:
                class_names.append(text)
            return class_names.index(text)
    else:
        code = int(raw)
    if 0 <= code < len(class_names):
        return code
    raise _RowSkip("label code out of range")


def read_csv(path, profile: DatasetProfile) -> tuple[LogTable, IngestReport]:
    """Parse a header-first CSV, keeping only profile columns.

    Unknown columns are dropped; rows with unparseable values in kept
    columns are skipped and counted in the returned report.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required")
        if profile.label_column not in header:
            raise DataError(f"{path}: header lacks label column {profile.label_column!r}")
        col_pos = {name: i for i, name in enumerate(header)}
        kept = [spec for spec in profile.columns if spec.name in col_pos]
        label_pos = col_pos[profile.label_column]

        report = IngestReport()
        class_names = list(profile.classes.names)
        columns: list[list] = [[] for _ in kept]
        labels: list[int] = []
        for row in reader:
            if not row:
                continue
            try:
                if label_pos >= len(row):
                    raise _RowSkip("short row")
                parsed = []
                for spec in kept:
                    pos = col_pos[spec.name]
                    if pos >= len(row):
                        raise _RowSkip("short row")
                    parsed.append(_parse_cell(row[pos], spec))
                label = _label_to_index(row[label_pos], class_names)
            except _RowSkip as skip:
                report.skip(skip.reason)
                continue
            for vals, v in zip(columns, parsed):
                vals.append(v)
            labels.append(label)

    if not labels:
        raise DataError(f"{path}: zero parseable rows")
    table = make_table(kept, columns, labels, class_names)
    return table, report


def write_csv(path, table: LogTable, label_column: str = "__label__") -> None:
    """Write a table as CSV in spec column order; labels as class names."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([spec.name for spec in table.specs] + [label_column])
        names = table.class_names
        for i in range(table.row_count):
            row = []
            for spec, vec in zip(table.specs, table.values):
                v = vec[i]
                if spec.storage == "bool":
                    row.append("T" if v else "F")
                elif spec.storage == "float64":
                    row.append("" if math.isnan(v) else repr(float(v)))
                else:
                    row.append(str(v))
            row.append(names[table.labels[i]])
            writer.writerow(row)


def _require_pyarrow():
    try:
        import pyarrow  # noqa: F401
        import pyarrow.parquet as pq
    except ImportError:
        raise UnsupportedFormatError(
            "format unsupported: parquet (install the 'parquet' extra)"
        )
    return pq


def read_parquet(path, profile: DatasetProfile) -> tuple[LogTable, IngestReport]:
    """Parquet counterpart of read_csv. Optional capability (needs pyarrow)."""
    pq = _require_pyarrow()
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        pa_table = pq.read_table(path)
    except Exception as exc:
        raise DataError(f"{path}: not a valid parquet file: {exc}") from exc
    present = set(pa_table.column_names)
    if profile.label_column not in present:
        raise DataError(f"{path}: lacks label column {profile.label_column!r}")
    kept = [spec for spec in profile.columns if spec.name in present]

    report = IngestReport()
    class_names = list(profile.classes.names)
    raw_cols = {spec.name: pa_table.column(spec.name).to_pylist() for spec in kept}
    raw_labels = pa_table.column(profile.label_column).to_pylist()

    columns: list[list] = [[] for _ in kept]
    labels: list[int] = []
    for i, raw_label in enumerate(raw_labels):
        try:
            parsed = []
            for spec in kept:
                v = raw_cols[spec.name][i]
                if v is None:
                    if spec.storage == "float64":
                        parsed.append(math.nan)
                        continue
                    raise _RowSkip(f"null in {spec.name}")
                parsed.append(_parse_cell(str(v), spec) if isinstance(v, str) else v)
            if raw_label is None:
                raise _RowSkip("missing label")
            label = _label_to_index(
                raw_label if isinstance(raw_label, str) else int(raw_label), class_names
            )
        except _RowSkip as skip:
            report.skip(skip.reason)
            continue
        for vals, v in zip(columns, parsed):
            vals.append(v)
        labels.append(label)

    if not labels:
        raise DataError(f"{path}: zero parseable rows")
    return make_table(kept, columns, labels, class_names), report


def write_parquet(path, table: LogTable, label_column: str = "__label__") -> None:
    pq = _require_pyarrow()
    import pyarrow as pa

    arrays = {}
    for spec, vec in zip(table.specs, table.values):
        if spec.storage == "text":
            arrays[spec.name] = pa.array([str(v) for v in vec], type=pa.string())
        else:
            arrays[spec.name] = pa.array(vec)
    names = table.class_names
    arrays[label_column] = pa.array([names[i] for i in table.labels], type=pa.string())
    pq.write_table(pa.table(arrays), path)


def read_table(path, profile: DatasetProfile) -> tuple[LogTable, IngestReport]:
    """Dispatch on file extension (.csv or .parquet)."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".parquet":
        return read_parquet(path, profile)
    return read_csv(path, profile)


def collate(tables: list[LogTable]) -> LogTable:
    """Concatenate tables that share identical column specs and classes."""
    if not tables:
        raise DataError("collate needs at least one table")
    first = tables[0]
    for t in tables[1:]:
        if t.specs != first.specs:
            raise SchemaMismatchError("tables have different column specs")
        if t.class_names != first.class_names:
            raise SchemaMismatchError("tables have different class lists")
    values = tuple(
        np.concatenate([t.values[i] for t in tables]) for i in range(len(first.specs))
    )
    labels = np.concatenate([t.labels for t in tables])
    return LogTable(first.specs, values, labels, first.class_names)


# --------------------------------------------------------------------------
# Synthetic desk-scale datasets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassSynth:
    name: str
    count: int
    center: tuple[float, ...]
    spread: float


@dataclass(frozen=True)
class SynthSpec:
    class_specs: tuple[ClassSynth, ...]
    feature_columns: tuple[ColumnSpec, ...]
    seed: int
    label_column: str = "label"

    def __post_init__(self):
        n_numeric = sum(1 for c in self.feature_columns if c.kind == "numeric")
        for cs in self.class_specs:
            if cs.count <= 0:
                raise DataError(f"class {cs.name!r} needs a positive count")
            if cs.spread <= 0:
                raise DataError(f"class {cs.name!r} needs a positive spread")
            if len(cs.center) != n_numeric:
                raise DataError(
                    f"class {cs.name!r} center has {len(cs.center)} dims, "
                    f"profile has {n_numeric} numeric columns"
                )


_EPOCH_BASE = 1_640_995_200.0  # 2022-01-01T00:00:00Z


def synthesize(spec: SynthSpec) -> LogTable:
    """Deterministic synthetic table: numeric clusters per class, generated
    categorical/ip/timestamp fillers. Each class draws from its own RNG
    stream derived from (seed, class index), so per-class generation order
    never changes results.
    """
    class_names = [cs.name for cs in spec.class_specs]
    columns: list[list] = [[] for _ in spec.feature_columns]
    labels: list[int] = []

    for ci, cs in enumerate(spec.class_specs):
        rng = np.random.default_rng((spec.seed, ci))
        numeric_at = 0
        for col_i, col in enumerate(spec.feature_columns):
            if col.kind == "numeric":
                vals = cs.center[numeric_at] + cs.spread * rng.standard_normal(cs.count)
                numeric_at += 1
                if col.storage == "int64":
                    vals = np.rint(vals).astype(np.int64)
                columns[col_i].extend(vals.tolist())
            elif col.kind == "boolean":
                columns[col_i].extend((rng.integers(0, 2, cs.count) == 1).tolist())
            elif col.kind == "categorical":
                vocab = [f"{col.name}_{j}" for j in range(3)]
                weights = np.roll(np.array([0.6, 0.25, 0.15]), ci % 3)
                columns[col_i].extend(rng.choice(vocab, size=cs.count, p=weights).tolist())
            elif col.kind == "ipv4":
                third = rng.integers(0, 256, cs.count)
                fourth = rng.integers(1, 255, cs.count)
                columns[col_i].extend(
                    f"10.{ci % 256}.{a}.{b}" for a, b in zip(third, fourth)
                )
            elif col.kind == "timestamp":
                offs = rng.uniform(0.0, 86400.0, cs.count)
                if col.storage == "float64":
                    columns[col_i].extend((_EPOCH_BASE + offs).tolist())
                else:
                    from .encode import epoch_to_iso

                    columns[col_i].extend(epoch_to_iso(_EPOCH_BASE + o) for o in offs)
        labels.extend([ci] * cs.count)

    return make_table(spec.feature_columns, columns, labels, class_names)


def synth_spec_from_json(text: str) -> SynthSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"synth spec is not valid JSON: {exc}") from exc
    try:
        cols = tuple(
            ColumnSpec(c["name"], c["kind"], c["storage"]) for c in doc["columns"]
        )
        classes = tuple(
            ClassSynth(
                c["name"], int(c["count"]), tuple(float(x) for x in c["center"]),
                float(c["spread"]),
            )
            for c in doc["classes"]
        )
        return SynthSpec(classes, cols, int(doc.get("seed", 0)),
                         str(doc.get("label_column", "label")))
    except KeyError as exc:
        raise DataError(f"synth spec missing field: {exc}") from exc


def load_synth_spec(path) -> SynthSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return synth_spec_from_json(fh.read())
