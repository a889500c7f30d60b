"""Command-line pipeline driver.

Subcommands compose the full flow (synth/ingest -> encode -> optional binary
amalgamation -> balance -> split -> train -> evaluate -> serve) with
reproducible seeds; every artifact embeds the tool version and the seed.

Exit codes: 0 success, 2 usage error, 3 data error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys

from . import balance as balance_mod
from . import connector as connector_mod
from . import evaluate as evaluate_mod
from . import forest as forest_mod
from ._version import __version__
from .encode import amalgamate_binary, encode_table, encode_with_map
from .errors import DataError, LogHunterError, UsageError
from .ingest import collate, load_synth_spec, read_table, synthesize, write_csv
from .profiles import builtin_profile, builtin_profiles
from .schema import class_histogram, load_profile


def _resolve_profile(name_or_path: str):
    try:
        return builtin_profile(name_or_path)
    except KeyError:
        pass
    if os.path.exists(name_or_path):
        return load_profile(name_or_path)
    raise UsageError(f"unknown profile {name_or_path!r} (not builtin, not a file)")


def _resolve_plan(name_or_path: str, seed: int | None):
    try:
        plan = balance_mod.builtin_plan(name_or_path)
    except KeyError:
        if not os.path.exists(name_or_path):
            raise UsageError(f"unknown plan {name_or_path!r} (not builtin, not a file)")
        plan = balance_mod.load_plan(name_or_path)
    if seed is not None:
        plan = plan.with_seed(seed)
    return plan


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def _stamp(doc: dict, seed: int) -> dict:
    doc["tool_version"] = __version__
    doc["seed"] = seed
    return doc


def _load_tables(args, profile):
    tables = []
    skipped = 0
    for path in args.input:
        table, report = read_table(path, profile)
        tables.append(table)
        skipped += report.skipped_rows
    return collate(tables), skipped


def _forest_config(args) -> forest_mod.ForestConfig:
    features = args.features
    if features not in ("sqrt", "all"):
        features = int(features)
    max_depth = None if args.max_depth == 0 else args.max_depth
    return forest_mod.ForestConfig(
        n_trees=args.trees,
        max_depth=max_depth,
        features_per_split=features,
        seed=args.seed,
    )


def _prepare_matrix(args, profile, table):
    if args.binary:
        benign = profile.classes.benign_names()
        if not benign:
            raise DataError(f"profile {profile.name!r} declares no benign class")
        table = amalgamate_binary(table, benign)
    return encode_table(table, profile)


def _write_matrix_csv(path, matrix) -> None:
    import csv as _csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(list(matrix.feature_names) + ["__label__"])
        for i in range(matrix.rows):
            row = [repr(float(v)) for v in matrix.values[i]]
            row.append(matrix.class_names[matrix.labels[i]])
            writer.writerow(row)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_profiles(args) -> int:
    if args.show:
        profile = _resolve_profile(args.show)
        print(f"profile {profile.name}")
        print(f"  label column: {profile.label_column}")
        print("  columns:")
        for c in profile.columns:
            print(f"    {c.name}  [{c.kind}/{c.storage}]")
        print("  classes:")
        for e in profile.classes.entries:
            print(f"    {e.name}: {', '.join(e.tactics)}")
        return 0
    for profile in builtin_profiles():
        print(f"{profile.name}: {len(profile.columns)} feature columns, "
              f"{len(profile.classes.entries)} classes, label={profile.label_column}")
    return 0


def cmd_synth(args) -> int:
    spec = load_synth_spec(args.spec)
    if args.seed is not None:
        spec = type(spec)(spec.class_specs, spec.feature_columns, args.seed,
                          spec.label_column)
    table = synthesize(spec)
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "table.csv"), table,
              label_column=spec.label_column)
    _write_json(os.path.join(args.out, "synth-report.json"), _stamp({
        "rows": table.row_count,
        "histogram": [list(p) for p in class_histogram(table)],
    }, spec.seed))
    print(f"synthesized {table.row_count} rows -> {args.out}/table.csv")
    return 0


def cmd_ingest(args) -> int:
    profile = _resolve_profile(args.profile)
    table, skipped = _load_tables(args, profile)
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "table.csv"), table,
              label_column=profile.label_column)
    _write_json(os.path.join(args.out, "ingest-report.json"), _stamp({
        "rows": table.row_count,
        "skipped_rows": skipped,
        "histogram": [list(p) for p in class_histogram(table)],
    }, args.seed))
    print(f"ingested {table.row_count} rows ({skipped} skipped) -> {args.out}/table.csv")
    return 0


def cmd_balance(args) -> int:
    profile = _resolve_profile(args.profile)
    table, _ = _load_tables(args, profile)
    matrix, _ = _prepare_matrix(args, profile, table)
    plan = _resolve_plan(args.plan, args.seed)
    matrix, trace = balance_mod.apply_plan(matrix, plan)
    os.makedirs(args.out, exist_ok=True)
    _write_matrix_csv(os.path.join(args.out, "matrix.csv"), matrix)
    _write_json(os.path.join(args.out, "balance-trace.json"),
                _stamp(trace.to_dict(), plan.seed))
    print(f"balanced to {matrix.rows} rows -> {args.out}/matrix.csv")
    return 0


def cmd_train(args) -> int:
    profile = _resolve_profile(args.profile)
    table, _ = _load_tables(args, profile)
    matrix, emap = _prepare_matrix(args, profile, table)
    config = _forest_config(args)
    os.makedirs(args.out, exist_ok=True)

    plan = _resolve_plan(args.plan, args.seed) if args.plan else None
    trace = None
    if plan is not None and args.balance_before_split:
        # paper-faithful order: the whole table is balanced, then split
        matrix, trace = balance_mod.apply_plan(matrix, plan)
        train_part, test_part = evaluate_mod.split_train_test(
            matrix, args.split, args.seed, stratified=args.stratified)
    elif plan is not None:
        # leak-safe default: removal is dataset-level, resampling train-only
        dataset_initial = balance_mod.matrix_histogram(matrix)
        matrix, removed = balance_mod.remove_small_classes(
            matrix, plan.min_class_size)
        dataset_after = balance_mod.matrix_histogram(matrix)
        train_part, test_part = evaluate_mod.split_train_test(
            matrix, args.split, args.seed, stratified=args.stratified)
        try:
            train_part, trace = balance_mod.apply_plan(
                train_part, plan.without_removal())
        except DataError as exc:
            raise DataError(
                f"{exc} (plan targets are dataset-level absolute counts; "
                "the train partition holds only a fraction of each class -- "
                "use --balance-before-split for a dataset-level plan)"
            ) from exc
        trace.removed_classes = removed
        trace.initial = dataset_initial
        trace.after_removal = dataset_after
    else:
        train_part, test_part = evaluate_mod.split_train_test(
            matrix, args.split, args.seed, stratified=args.stratified)

    model = forest_mod.train(train_part, config)
    model.encoding = emap
    forest_mod.save_model(os.path.join(args.out, "model.json"), model)

    report = evaluate_mod.evaluate_model(model, test_part, seed=args.seed,
                                         split_ratio=args.split)
    _write_report(args, report)
    if trace is not None:
        _write_json(os.path.join(args.out, "balance-trace.json"),
                    _stamp(trace.to_dict(), plan.seed))
    print(f"trained {model.n_trees} trees, accuracy {report.accuracy:.6f} "
          f"-> {args.out}/model.json")
    return 0


def cmd_evaluate(args) -> int:
    profile = _resolve_profile(args.profile)
    table, _ = _load_tables(args, profile)
    os.makedirs(args.out, exist_ok=True)

    if args.model:
        model = forest_mod.load_model(args.model)
        if model.encoding is None:
            raise DataError("model file lacks an encoding map")
        if args.binary:
            benign = profile.classes.benign_names()
            table = amalgamate_binary(table, benign)
        matrix, _ = encode_with_map(table, model.encoding)
        report = evaluate_mod.evaluate_model(model, matrix, seed=args.seed)
        _write_report(args, report)
        print(f"accuracy {report.accuracy:.6f} on {matrix.rows} rows")
        return 0

    matrix, _ = _prepare_matrix(args, profile, table)
    config = _forest_config(args)
    plan = _resolve_plan(args.plan, args.seed) if args.plan else None
    mean, std, reports = evaluate_mod.repeated_holdout(
        matrix, config, args.runs, args.split, args.seed,
        stratified=args.stratified, plan=plan,
        rebalance_per_split=args.rebalance_per_split)
    report = evaluate_mod.aggregate_report(reports, args.seed, args.split)
    _write_report(args, report)
    print(f"mean accuracy {mean:.6f} (std {std:.6f}) over {args.runs} runs")
    return 0


def _write_report(args, report) -> None:
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    if getattr(args, "text", False):
        grid = report.to_text()
        with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(grid)
        print(grid, end="")


def cmd_predict(args) -> int:
    model = forest_mod.load_model(args.model)
    if model.encoding is None:
        raise DataError("model file lacks an encoding map")
    profile = _resolve_profile(args.profile)
    table, _ = _load_tables(args, profile)
    matrix, _ = encode_with_map(table, model.encoding)
    labels, votes = forest_mod.predict_batch(model, matrix.values)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "predictions.csv")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["row", "predicted", "votes"])
        for i, li in enumerate(labels):
            writer.writerow([i, model.class_names[int(li)],
                             "|".join(str(int(v)) for v in votes[i])])
    counts = {name: int((labels == i).sum())
              for i, name in enumerate(model.class_names)}
    _write_json(os.path.join(args.out, "predict-report.json"), _stamp({
        "rows": int(len(labels)),
        "predicted_histogram": counts,
        "model": os.path.basename(args.model),
    }, args.seed))
    print(f"wrote {len(labels)} predictions -> {out_path}")
    return 0


def cmd_serve(args) -> int:
    model = forest_mod.load_model(args.model)
    profile = _resolve_profile(args.profile)
    policy = connector_mod.BatchPolicy(
        batch_size=args.batch_size,
        max_pending_batches=args.max_pending,
        trees_per_batch=args.trees_per_batch,
    )
    plan = _resolve_plan(args.plan, args.seed) if args.plan else None
    os.makedirs(args.out, exist_ok=True)

    if args.tail:
        source = connector_mod.FileTailSource(
            args.tail, follow=args.follow, idle_timeout=args.idle_timeout)
    elif args.listen is not None:
        source = connector_mod.TcpLineSource(
            port=args.listen, idle_timeout=args.idle_timeout)
        print(f"listening on 127.0.0.1:{source.port}")
    else:
        raise UsageError("serve needs --tail PATH or --listen PORT")

    def on_sigint(signum, frame):
        source.stop()

    try:
        previous = signal.signal(signal.SIGINT, on_sigint)
    except ValueError:  # not the main thread (embedded use); skip the hook
        previous = None
    checkpoint_path = os.path.join(args.out, "model-checkpoint.json")
    try:
        updated, log = connector_mod.run_incremental(
            connector_mod.subscribe(source), model, profile, policy, plan=plan,
            archive_dir=args.archive,
            checkpoint=lambda m: forest_mod.save_model(checkpoint_path, m),
        )
    finally:
        if previous is not None:
            signal.signal(signal.SIGINT, previous)
    forest_mod.save_model(os.path.join(args.out, "model.json"), updated)
    with open(os.path.join(args.out, "run-log.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(log.to_jsonl())
    _write_json(os.path.join(args.out, "serve-report.json"), _stamp({
        "received": log.received, "filtered": log.filtered,
        "trained_batches": log.trained_batches,
        "dropped_batches": log.dropped_batches,
        "trees": updated.n_trees,
    }, args.seed))
    print(f"received {log.received}, trained {log.trained_batches} batches "
          f"({log.trained_rows} rows), dropped {log.dropped_batches}, "
          f"filtered {log.filtered}; {updated.n_trees} trees "
          f"-> {args.out}/model.json")
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _add_common(p, out_default="."):
    p.add_argument("--seed", type=int, default=0, help="run seed (recorded in outputs)")
    p.add_argument("--out", default=out_default, help="output directory")


def _add_forest_flags(p):
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=16,
                   help="0 means unlimited depth")
    p.add_argument("--features", default="sqrt",
                   help="features per split: sqrt, all, or a count")
    p.add_argument("--split", type=float, default=0.7,
                   help="train fraction for the holdout split")
    strat = p.add_mutually_exclusive_group()
    strat.add_argument("--stratified", dest="stratified", action="store_true",
                       default=True)
    strat.add_argument("--no-stratified", dest="stratified", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loghunter",
        description="Network-log threat hunting: ingest, rebalance, train, "
                    "evaluate, and stream-train a random-forest tactic classifier.",
    )
    parser.add_argument("--version", action="version", version=f"loghunter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profiles", help="list built-in dataset profiles")
    p.add_argument("--show", help="print one profile's columns and classes")
    p.set_defaults(func=cmd_profiles)

    p = sub.add_parser("synth", help="generate a deterministic synthetic table")
    p.add_argument("--spec", required=True, help="synth spec JSON file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the spec's seed")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="read and collate source files")
    p.add_argument("--profile", required=True)
    p.add_argument("--input", action="append", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("balance", help="encode a table and apply a balance plan")
    p.add_argument("--profile", required=True)
    p.add_argument("--input", action="append", required=True)
    p.add_argument("--plan", required=True, help="plan file or builtin name")
    p.add_argument("--binary", action="store_true",
                   help="amalgamate attack classes before balancing")
    _add_common(p)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("train", help="encode, split, balance, train, evaluate")
    p.add_argument("--profile", required=True)
    p.add_argument("--input", action="append", required=True)
    p.add_argument("--plan", help="balance plan file or builtin name")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--balance-before-split", action="store_true",
                   help="balance the whole table before splitting")
    p.add_argument("--text", action="store_true", help="also render the text grid")
    _add_forest_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model, or repeated holdout")
    p.add_argument("--profile", required=True)
    p.add_argument("--input", action="append", required=True)
    p.add_argument("--model", help="score this model instead of retraining")
    p.add_argument("--runs", type=int, default=1, help="repeated holdout runs")
    p.add_argument("--plan")
    p.add_argument("--rebalance-per-split", action="store_true")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--text", action="store_true")
    _add_forest_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="predict classes for a table")
    p.add_argument("--model", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--input", action="append", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("serve", help="stream events into incremental training")
    p.add_argument("--model", required=True)
    p.add_argument("--profile", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--tail", help="follow a log file")
    src.add_argument("--listen", type=int, help="listen on a TCP port")
    p.add_argument("--follow", action="store_true",
                   help="keep tailing after the existing lines")
    p.add_argument("--idle-timeout", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--max-pending", type=int, default=4)
    p.add_argument("--trees-per-batch", type=int, default=1)
    p.add_argument("--plan")
    p.add_argument("--archive", default=None, help="write one batch file per batch")
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, OSError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 4
    except LogHunterError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
