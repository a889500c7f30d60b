import json
import os

import pytest

from loghunter.cli import main
from loghunter.ingest import write_csv
from loghunter.schema import profile_to_json

from conftest import demo_profile, demo_table


SPEC_DOC = {
    "seed": 7,
    "columns": [
        {"name": "f0", "kind": "numeric", "storage": "float64"},
        {"name": "f1", "kind": "numeric", "storage": "float64"},
        {"name": "proto", "kind": "categorical", "storage": "text"},
    ],
    "classes": [
        {"name": "Benign", "count": 120, "center": [0.0, 0.0], "spread": 1.0},
        {"name": "Flood", "count": 60, "center": [8.0, 8.0], "spread": 1.0},
        {"name": "Probe", "count": 40, "center": [-8.0, 8.0], "spread": 1.0},
    ],
}


@pytest.fixture
def workdir(tmp_path):
    spec_path = tmp_path / "demo.spec"
    spec_path.write_text(json.dumps(SPEC_DOC))
    profile = demo_profile(n_numeric=2, extras=False,
                           class_names=("Benign", "Flood", "Probe"))
    cols = list(profile.columns) + [
        type(profile.columns[0])("proto", "categorical", "text")]
    profile = type(profile)("demo", tuple(cols), "label", profile.classes)
    profile_path = tmp_path / "demo-profile.json"
    profile_path.write_text(profile_to_json(profile))
    return tmp_path, spec_path, profile_path


def run(args):
    return main([str(a) for a in args])


def test_profiles_lists_builtins(capsys):
    assert run(["profiles"]) == 0
    out = capsys.readouterr().out
    for name in ("uwf2022", "cicids2017", "toniot"):
        assert name in out


def test_profiles_show_uwf(capsys):
    assert run(["profiles", "--show", "uwf2022"]) == 0
    out = capsys.readouterr().out
    assert "label_tactic" in out
    assert "Reconnaissance" in out


def test_profiles_show_toniot_mitm(capsys):
    assert run(["profiles", "--show", "toniot"]) == 0
    out = capsys.readouterr().out
    assert "Mitm: T1557" in out


def test_synth_then_train_deterministic(workdir):
    tmp, spec_path, profile_path = workdir
    out1 = tmp / "r1"
    out2 = tmp / "r2"
    assert run(["synth", "--spec", spec_path, "--seed", 7, "--out", tmp]) == 0

    common = ["train", "--profile", profile_path, "--input", tmp / "table.csv",
              "--trees", 10, "--seed", 7]
    assert run(common + ["--out", out1]) == 0
    assert run(common + ["--out", out2]) == 0
    assert (out1 / "model.json").read_bytes() == (out2 / "model.json").read_bytes()
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
    report = json.loads((out1 / "report.json").read_text())
    assert report["seed"] == 7
    assert report["tool_version"]


def test_train_binary_collapses_classes(workdir):
    tmp, spec_path, profile_path = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    out = tmp / "bin"
    assert run(["train", "--profile", profile_path, "--input", tmp / "table.csv",
                "--trees", 5, "--binary", "--seed", 1, "--out", out]) == 0
    model = json.loads((out / "model.json").read_text())
    assert model["class_names"] == ["Benign", "Malicious"]


def test_evaluate_runs_mean_accuracy(workdir):
    tmp, spec_path, profile_path = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    out = tmp / "eval"
    assert run(["evaluate", "--profile", profile_path, "--input", tmp / "table.csv",
                "--trees", 5, "--runs", 5, "--seed", 3, "--out", out]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["n_runs"] == 5
    assert len(report["run_accuracies"]) == 5
    assert 0.0 <= report["accuracy"] <= 1.0


def test_balance_subcommand_writes_trace(workdir):
    tmp, spec_path, profile_path = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    plan = {"min_class_size": 2, "smote_k": 3, "seed": 0,
            "undersample": {"Benign": 80},
            "oversample": {"Probe": 60},
            "smote": {"Probe": 90}}
    plan_path = tmp / "demo.plan"
    plan_path.write_text(json.dumps(plan))
    out = tmp / "bal"
    assert run(["balance", "--profile", profile_path, "--input", tmp / "table.csv",
                "--plan", plan_path, "--out", out]) == 0
    trace = json.loads((out / "balance-trace.json").read_text())
    final = dict((name, c) for name, c in trace["after_smote"])
    assert final == {"Benign": 80, "Flood": 60, "Probe": 90}
    assert (out / "matrix.csv").exists()


def test_predict_subcommand(workdir):
    tmp, spec_path, profile_path = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    out = tmp / "m"
    run(["train", "--profile", profile_path, "--input", tmp / "table.csv",
         "--trees", 5, "--seed", 1, "--out", out])
    pred_out = tmp / "preds"
    assert run(["predict", "--model", out / "model.json", "--profile", profile_path,
                "--input", tmp / "table.csv", "--out", pred_out]) == 0
    lines = (pred_out / "predictions.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 220


def test_serve_over_file(workdir):
    tmp, spec_path, profile_path = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    out = tmp / "m"
    run(["train", "--profile", profile_path, "--input", tmp / "table.csv",
         "--trees", 4, "--seed", 1, "--out", out])

    events_path = tmp / "events.jsonl"
    with open(events_path, "w") as fh:
        for i in range(9):
            fh.write(json.dumps({"f0": 0.1 * i, "f1": 0.2, "proto": "proto_0",
                                 "label": "Benign" if i % 2 else "Flood"}) + "\n")

    serve_out = tmp / "served"
    archive = tmp / "arch"
    assert run(["serve", "--model", out / "model.json", "--profile", profile_path,
                "--tail", events_path, "--batch-size", 3, "--trees-per-batch", 2,
                "--max-pending", 5, "--archive", archive, "--out", serve_out]) == 0
    model = json.loads((serve_out / "model.json").read_text())
    assert len(model["trees"]) == 4 + 6
    assert sorted(p.name for p in archive.iterdir()) == [
        "batch-0.csv", "batch-1.csv", "batch-2.csv"]
    log_lines = (serve_out / "run-log.jsonl").read_text().strip().splitlines()
    totals = json.loads(log_lines[-1])
    assert totals["received"] == 9
    assert (serve_out / "model-checkpoint.json").exists()


def test_serve_unknown_model_exits_nonzero(workdir, capsys):
    tmp, _, profile_path = workdir
    code = run(["serve", "--model", tmp / "missing.json", "--profile", profile_path,
                "--tail", tmp / "whatever.log", "--out", tmp / "s"])
    assert code == 4
    assert "error:" in capsys.readouterr().err


def test_data_error_exit_code(workdir, capsys):
    tmp, spec_path, profile_path = workdir
    bad = tmp / "bad.csv"
    bad.write_text("f0,f1,proto\n1,2,tcp\n")  # lacks the label column
    code = run(["train", "--profile", profile_path, "--input", bad,
                "--out", tmp / "x"])
    assert code == 3
    err = capsys.readouterr().err
    assert err.startswith("error: data:")
    assert "\n" not in err.strip()


def test_usage_error_exit_code(workdir, capsys):
    tmp, spec_path, _ = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    code = run(["train", "--profile", "no-such-profile",
                "--input", tmp / "table.csv", "--out", tmp / "x"])
    assert code == 2


def test_train_feature_flag_variants(workdir):
    tmp, spec_path, profile_path = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    for i, features in enumerate(("all", "2", "sqrt")):
        out = tmp / f"feat{i}"
        assert run(["train", "--profile", profile_path, "--input",
                    tmp / "table.csv", "--trees", 3, "--features", features,
                    "--max-depth", 0, "--seed", 1, "--out", out]) == 0
        model = json.loads((out / "model.json").read_text())
        want = {"all": "all", "2": 2, "sqrt": "sqrt"}[features]
        assert model["config"]["features_per_split"] == want
        assert model["config"]["max_depth"] is None


def test_predict_sidecar_report(workdir):
    tmp, spec_path, profile_path = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    out = tmp / "m"
    run(["train", "--profile", profile_path, "--input", tmp / "table.csv",
         "--trees", 4, "--seed", 1, "--out", out])
    pred_out = tmp / "p"
    assert run(["predict", "--model", out / "model.json", "--profile",
                profile_path, "--input", tmp / "table.csv", "--seed", 5,
                "--out", pred_out]) == 0
    doc = json.loads((pred_out / "predict-report.json").read_text())
    assert doc["seed"] == 5
    assert doc["tool_version"]
    assert doc["rows"] == 220


def test_train_with_plan_after_split(workdir):
    tmp, spec_path, profile_path = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    plan = {"min_class_size": 1, "smote_k": 3, "seed": 0,
            "smote": {"Probe": 60}}
    plan_path = tmp / "p.plan"
    plan_path.write_text(json.dumps(plan))
    out = tmp / "planned"
    assert run(["train", "--profile", profile_path, "--input", tmp / "table.csv",
                "--plan", plan_path, "--trees", 5, "--seed", 2, "--out", out]) == 0
    trace = json.loads((out / "balance-trace.json").read_text())
    assert dict(trace["after_smote"])["Probe"] == 60


def test_train_plan_removal_happens_before_split(workdir, capsys):
    # a singleton class must not break the stratified split: removal is a
    # dataset-level step even when resampling is train-partition-only
    tmp, spec_path, profile_path = workdir
    doc = dict(SPEC_DOC)
    doc["classes"] = SPEC_DOC["classes"] + [
        {"name": "Ghost", "count": 1, "center": [30.0, 30.0], "spread": 1.0}]
    spec2 = tmp / "singleton.spec"
    spec2.write_text(json.dumps(doc))
    profile = json.loads((tmp / "demo-profile.json").read_text().replace(
        '"classes": [', '"classes": [{"name": "Ghost", "tactics": ["T1999"]},'))
    profile_path2 = tmp / "profile2.json"
    profile_path2.write_text(json.dumps(profile))
    run(["synth", "--spec", spec2, "--out", tmp])
    plan_path = tmp / "r.plan"
    plan_path.write_text(json.dumps({"min_class_size": 2, "smote_k": 3,
                                     "seed": 0, "smote": {"Probe": 40}}))
    out = tmp / "removed"
    assert run(["train", "--profile", profile_path2, "--input", tmp / "table.csv",
                "--plan", plan_path, "--trees", 4, "--seed", 2, "--out", out]) == 0
    trace = json.loads((out / "balance-trace.json").read_text())
    assert trace["removed_classes"] == ["Ghost"]
    assert dict(trace["initial"])["Ghost"] == 1
    assert "Ghost" not in dict(trace["after_smote"])


def test_train_dataset_level_plan_needs_before_split_flag(workdir, capsys):
    tmp, spec_path, profile_path = workdir
    run(["synth", "--spec", spec_path, "--out", tmp])
    plan_path = tmp / "abs.plan"
    # target equals the full-dataset Benign count: unreachable on a 70% slice
    plan_path.write_text(json.dumps({"min_class_size": 1, "smote_k": 3,
                                     "seed": 0, "undersample": {"Benign": 110}}))
    code = run(["train", "--profile", profile_path, "--input", tmp / "table.csv",
                "--plan", plan_path, "--trees", 4, "--seed", 2,
                "--out", tmp / "x1"])
    assert code == 3
    assert "--balance-before-split" in capsys.readouterr().err
    assert run(["train", "--profile", profile_path, "--input", tmp / "table.csv",
                "--plan", plan_path, "--balance-before-split", "--trees", 4,
                "--seed", 2, "--out", tmp / "x2"]) == 0
    trace = json.loads((tmp / "x2" / "balance-trace.json").read_text())
    assert dict(trace["after_under"])["Benign"] == 110
