"""Desk-scale streaming pipeline: pluggable transports feed newline-delimited
JSON log events through parsing/filtering into fixed-size batches that extend
a forest model incrementally.

Transports stand in for a broker: a file tail (replay existing lines, then
follow appends) and a TCP line listener. The producer side is never blocked;
when the pending-batch queue overflows max_pending_batches, random batches
are shed instead.
"""

from __future__ import annotations

import json
import math
import os
import socket
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import balance as balance_mod
from .encode import encode_with_map
from .errors import DataError
from .forest import ForestModel, extend, maybe_drop_batch
from .ingest import write_csv, write_parquet
from .schema import DatasetProfile, LogTable, make_table


@dataclass(frozen=True)
class LogEvent:
    raw: str
    received_at: float

    def __post_init__(self):
        if not self.raw:
            raise DataError("events must carry a non-empty line")


@dataclass(frozen=True)
class BatchPolicy:
    batch_size: int
    max_pending_batches: int = 4
    trees_per_batch: int = 1

    def __post_init__(self):
        if min(self.batch_size, self.max_pending_batches, self.trees_per_batch) < 1:
            raise DataError("batch policy values must all be positive")


# --------------------------------------------------------------------------
# Transports
# --------------------------------------------------------------------------

class FileTailSource:
    """Replays a file's lines in order; with follow=True keeps polling for
    appended lines until stop() or idle_timeout seconds of silence."""

    def __init__(self, path, follow: bool = False, poll_interval: float = 0.05,
                 idle_timeout: float | None = None):
        self.path = str(path)
        self.follow = follow
        self.poll_interval = poll_interval
        self.idle_timeout = idle_timeout
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()

    def events(self):
        if not os.path.exists(self.path):
            raise FileNotFoundError(self.path)
        with open(self.path, "r", encoding="utf-8") as fh:
            pending = ""
            last_data = time.monotonic()
            while True:
                chunk = fh.readline()
                if chunk:
                    pending += chunk
                    if pending.endswith("\n"):
                        line = pending.rstrip("\n")
                        pending = ""
                        last_data = time.monotonic()
                        if line:
                            yield LogEvent(line, time.time())
                    continue
                if not self.follow or self._stop.is_set():
                    break
                if (self.idle_timeout is not None
                        and time.monotonic() - last_data > self.idle_timeout):
                    break
                time.sleep(self.poll_interval)
            if pending.strip():
                yield LogEvent(pending.rstrip("\n"), time.time())


class TcpLineSource:
    """Listens for line-oriented producers; each connection's lines arrive in
    order. The stream ends on stop(), or once at least one producer connected
    and all have since closed (after idle_timeout seconds of silence)."""

    def __init__(self, port: int = 0, host: str = "127.0.0.1",
                 idle_timeout: float | None = 1.0):
        self.host = host
        self.idle_timeout = idle_timeout
        self._queue: list[LogEvent] = []
        self._cond = threading.Condition()
        self._stop = threading.Event()
        self._seen_conn = False
        self._open_conns = 0
        self._server = socket.create_server((host, port))
        self._server.settimeout(0.1)
        self.port = self._server.getsockname()[1]
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def stop(self) -> None:
        self._stop.set()
        with self._cond:
            self._cond.notify_all()

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with self._cond:
                self._seen_conn = True
                self._open_conns += 1
            threading.Thread(target=self._reader, args=(conn,), daemon=True).start()
        self._server.close()

    def _reader(self, conn):
        try:
            buf = b""
            while True:
                data = conn.recv(4096)
                if not data:
                    break
                buf += data
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    text = line.decode("utf-8").rstrip("\r")
                    if text:
                        with self._cond:
                            self._queue.append(LogEvent(text, time.time()))
                            self._cond.notify_all()
        finally:
            conn.close()
            with self._cond:
                self._open_conns -= 1
                self._cond.notify_all()

    def events(self):
        last_data = time.monotonic()
        while True:
            with self._cond:
                while not self._queue and not self._stop.is_set():
                    done = (self._seen_conn and self._open_conns == 0)
                    if done and (self.idle_timeout is None
                                 or time.monotonic() - last_data > self.idle_timeout):
                        return
                    self._cond.wait(timeout=0.05)
                if self._queue:
                    event = self._queue.pop(0)
                    last_data = time.monotonic()
                elif self._stop.is_set():
                    if not self._queue:
                        return
                    continue
            yield event


def subscribe(source):
    """Ordered event stream from a transport descriptor.

    Accepts a source object (FileTailSource / TcpLineSource), an existing
    iterable of LogEvents, or a text descriptor 'tail:<path>' / 'tcp:<port>'.
    """
    if isinstance(source, str):
        kind, _, arg = source.partition(":")
        if kind == "tail":
            source = FileTailSource(arg)
        elif kind == "tcp":
            source = TcpLineSource(port=int(arg))
        else:
            raise DataError(f"unknown transport descriptor {source!r}")
    if hasattr(source, "events"):
        return source.events()
    return iter(source)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

def parse_event(event: LogEvent, profile: DatasetProfile):
    """Parse one self-describing key-value line against the profile.

    Returns a column-name -> typed-value dict (label included) or None for
    malformed or label-missing lines; extra keys are ignored. Missing feature
    keys fall back to a missing marker the encoder understands.
    """
    try:
        doc = json.loads(event.raw)
    except json.JSONDecodeError:
        return None
    if not isinstance(doc, dict) or profile.label_column not in doc:
        return None
    record = {profile.label_column: doc[profile.label_column]}
    for spec in profile.columns:
        raw = doc.get(spec.name)
        try:
            if spec.storage == "int64":
                record[spec.name] = 0 if raw is None else int(raw)
            elif spec.storage == "float64":
                record[spec.name] = math.nan if raw is None else float(raw)
            elif spec.storage == "bool":
                if raw is None:
                    record[spec.name] = False
                elif isinstance(raw, bool):
                    record[spec.name] = raw
                else:
                    low = str(raw).strip().lower()
                    if low in ("true", "t", "1"):
                        record[spec.name] = True
                    elif low in ("false", "f", "0"):
                        record[spec.name] = False
                    else:
                        return None
            else:
                record[spec.name] = "" if raw is None else str(raw)
        except (TypeError, ValueError):
            return None
    return record


def _records_to_table(records, profile: DatasetProfile, class_names) -> LogTable:
    labels = []
    for rec in records:
        raw = rec[profile.label_column]
        if isinstance(raw, str):
            labels.append(class_names.index(raw))
        else:
            labels.append(int(raw))
    columns = [[rec[spec.name] for rec in records] for spec in profile.columns]
    return make_table(profile.columns, columns, labels, class_names)


def _label_known(record, profile: DatasetProfile, class_names) -> bool:
    raw = record[profile.label_column]
    if isinstance(raw, str):
        return raw in class_names
    try:
        return 0 <= int(raw) < len(class_names)
    except (TypeError, ValueError):
        return False


# --------------------------------------------------------------------------
# Incremental run
# --------------------------------------------------------------------------

@dataclass
class RunLog:
    entries: list[dict] = field(default_factory=list)
    received: int = 0
    filtered: int = 0
    trained_rows: int = 0
    dropped_rows: int = 0
    trained_batches: int = 0
    dropped_batches: int = 0

    def to_jsonl(self) -> str:
        lines = [json.dumps(e, sort_keys=True) for e in self.entries]
        lines.append(json.dumps({
            "received": self.received, "filtered": self.filtered,
            "trained_rows": self.trained_rows, "dropped_rows": self.dropped_rows,
            "trained_batches": self.trained_batches,
            "dropped_batches": self.dropped_batches,
        }, sort_keys=True))
        return "\n".join(lines) + "\n"


def _balance_batch(matrix, plan):
    # dataset-level class removal is skipped per batch so the class space
    # stays aligned with the model's
    matrix = balance_mod.undersample(matrix, plan.under_targets, plan.seed)
    matrix = balance_mod.random_oversample(matrix, plan.over_targets, plan.seed)
    matrix, _ = balance_mod.smote(matrix, plan.smote_targets, plan.smote_k, plan.seed)
    return matrix


class _Run:
    def __init__(self, model, profile, policy, plan, archive_dir, archive_format,
                 checkpoint=None):
        if model.encoding is None:
            raise DataError("incremental training needs a model with an encoding map")
        self.model = model
        self.profile = profile
        self.policy = policy
        self.plan = plan
        self.archive_dir = archive_dir
        self.archive_format = archive_format
        self.checkpoint = checkpoint
        self.log = RunLog()
        self.pending: list[tuple[int, LogTable]] = []
        self.next_batch_id = 0
        self.drop_rng = np.random.default_rng((model.config.seed, 0xD20))
        self.lock = threading.Lock()

    def enqueue(self, records) -> None:
        table = _records_to_table(records, self.profile, list(self.model.class_names))
        batch_id = self.next_batch_id
        self.next_batch_id += 1
        if self.archive_dir is not None:
            self._archive(batch_id, table)
        with self.lock:
            self.pending.append((batch_id, table))
            if len(self.pending) > self.policy.max_pending_batches:
                seed = int(self.drop_rng.integers(0, 2**63 - 1))
                kept = maybe_drop_batch(self.pending, self.policy.max_pending_batches, seed)
                kept_ids = {bid for bid, _ in kept}
                for bid, tbl in self.pending:
                    if bid not in kept_ids:
                        self.log.dropped_batches += 1
                        self.log.dropped_rows += tbl.row_count
                        self.log.entries.append({
                            "batch_id": bid, "rows": tbl.row_count, "dropped": True,
                            "tree_count_after": self.model.n_trees,
                        })
                self.pending = kept

    def train_one(self) -> bool:
        with self.lock:
            if not self.pending:
                return False
            batch_id, table = self.pending.pop(0)
        matrix, _ = encode_with_map(table, self.model.encoding)
        if self.plan is not None:
            matrix = _balance_batch(matrix, self.plan)
        self.model = extend(self.model, matrix, self.policy.trees_per_batch)
        self.log.trained_batches += 1
        self.log.trained_rows += table.row_count
        self.log.entries.append({
            "batch_id": batch_id, "rows": table.row_count, "dropped": False,
            "tree_count_after": self.model.n_trees,
        })
        if self.checkpoint is not None:
            self.checkpoint(self.model)
        return True

    def _archive(self, batch_id, table) -> None:
        os.makedirs(self.archive_dir, exist_ok=True)
        path = os.path.join(self.archive_dir, f"batch-{batch_id}.{self.archive_format}")
        if self.archive_format == "parquet":
            write_parquet(path, table, label_column=self.profile.label_column)
        else:
            write_csv(path, table, label_column=self.profile.label_column)


def run_incremental(stream, model: ForestModel, profile: DatasetProfile,
                    policy: BatchPolicy, plan=None, archive_dir=None,
                    archive_format: str = "csv", threaded: bool = False,
                    trainer_delay: float = 0.0, checkpoint=None,
                    ) -> tuple[ForestModel, RunLog]:
    """Consume a stream into batches and extend the model per batch.

    Single-threaded mode (default) trains each batch as soon as it fills, so
    nothing is ever dropped and the result equals offline extend calls on the
    same batches. Threaded mode runs the producer concurrently with the
    trainer; trainer_delay (seconds per batch) simulates a slow trainer so
    queue overflow and random batch dropping can be exercised.

    A final partial batch is flushed and trained when the stream ends.
    Accounting satisfies received == trained_rows + dropped_rows + filtered.
    """
    run = _Run(model, profile, policy, plan, archive_dir, archive_format, checkpoint)
    class_names = list(model.class_names)

    def produce():
        buf = []
        for event in stream:
            run.log.received += 1
            record = parse_event(event, profile)
            if record is None or not _label_known(record, profile, class_names):
                run.log.filtered += 1
                continue
            buf.append(record)
            if len(buf) == policy.batch_size:
                run.enqueue(buf)
                buf = []
                if not threaded:
                    while run.train_one():
                        pass
        if buf:
            run.enqueue(buf)
            if not threaded:
                while run.train_one():
                    pass

    if threaded:
        producer = threading.Thread(target=produce)
        producer.start()
        while producer.is_alive() or run.pending:
            if not run.train_one():
                time.sleep(0.005)
                continue
            if trainer_delay:
                time.sleep(trainer_delay)
        producer.join()
    else:
        produce()
        while run.train_one():
            pass

    return run.model, run.log
