import numpy as np
import pytest

from loghunter.balance import (BalancePlan, apply_plan, builtin_plan,
                               load_plan, plan_from_json, plan_to_json,
                               random_oversample, remove_small_classes,
                               smote, undersample)
from loghunter.encode import FeatureMatrix, encode_table
from loghunter.errors import DataError
from loghunter.schema import class_histogram

from conftest import demo_profile, demo_table


def matrix_from(counts, n_numeric=4, seed=42, separation=6.0):
    table = demo_table(counts, n_numeric=n_numeric, extras=False, seed=seed,
                       separation=separation)
    profile = demo_profile(n_numeric=n_numeric, extras=False,
                           class_names=tuple(counts))
    m, _ = encode_table(table, profile)
    return m


def hist(matrix):
    counts = np.bincount(matrix.labels, minlength=len(matrix.class_names))
    return {name: int(c) for name, c in zip(matrix.class_names, counts)}


def test_remove_small_classes_table():
    t = demo_table({"A": 5, "B": 1, "C": 2}, extras=False)
    out, removed = remove_small_classes(t, 2)
    assert removed == ["B"]
    assert out.row_count == 7
    assert out.class_names == ("A", "C")
    assert dict(class_histogram(out)) == {"A": 5, "C": 2}


def test_remove_small_classes_identity():
    t = demo_table({"A": 5, "B": 1}, extras=False)
    out, removed = remove_small_classes(t, 1)
    assert removed == []
    assert out is t


def test_remove_small_classes_uwf_singletons():
    counts = {
        "Benign traffic": 50, "Reconnaissance": 49, "Discovery": 20,
        "Credential Access": 5, "Privilege Escalation": 4, "Exfiltration": 3,
        "Lateral Movement": 3, "Resource Development": 2,
        "Defense Evasion": 1, "Initial Access": 1, "Persistence": 1,
    }
    t = demo_table(counts, extras=False)
    out, removed = remove_small_classes(t, 2)
    assert removed == ["Defense Evasion", "Initial Access", "Persistence"]
    assert out.row_count == t.row_count - 3


def test_remove_all_classes_errors():
    t = demo_table({"A": 1}, extras=False)
    with pytest.raises(DataError):
        remove_small_classes(t, 2)


def test_undersample_subset_property():
    m = matrix_from({"A": 10, "B": 6})
    out = undersample(m, {"A": 4}, seed=3)
    assert hist(out) == {"A": 4, "B": 6}
    original = {tuple(r) for r in m.values}
    assert all(tuple(r) in original for r in out.values)


def test_undersample_identity_at_count():
    m = matrix_from({"A": 10, "B": 6})
    out = undersample(m, {"A": 10}, seed=3)
    assert sorted(map(tuple, out.values)) == sorted(map(tuple, m.values))


def test_undersample_target_above_count():
    m = matrix_from({"A": 10, "B": 6})
    with pytest.raises(DataError):
        undersample(m, {"A": 11}, seed=0)


def test_oversample_duplicates():
    m = matrix_from({"A": 1, "B": 2})
    out = random_oversample(m, {"A": 3}, seed=0)
    assert hist(out) == {"A": 3, "B": 2}
    a_rows = out.values[out.labels == 0]
    assert np.all(a_rows == a_rows[0])


def test_oversample_multiset_containment(rng):
    m = matrix_from({"A": 5, "B": 7})
    out = random_oversample(m, {"A": 20, "B": 9}, seed=5)
    assert hist(out) == {"A": 20, "B": 9}
    original = {tuple(r) for r in m.values}
    assert all(tuple(r) in original for r in out.values)


def test_oversample_target_below_count():
    m = matrix_from({"A": 5, "B": 7})
    with pytest.raises(DataError):
        random_oversample(m, {"A": 4}, seed=0)


def test_smote_identical_points():
    values = np.array([[1.0, 2.0], [1.0, 2.0], [9.0, 9.0], [8.0, 8.0]])
    m = FeatureMatrix(values, np.array([0, 0, 1, 1]), ("p", "q"), ("x", "y"))
    out, parents = smote(m, {"p": 3}, k=1, seed=0)
    assert hist(out) == {"p": 3, "q": 2}
    assert np.array_equal(out.values[-1], [1.0, 2.0])
    assert parents.shape == (1, 2)


def test_smote_segment_membership():
    values = np.array([[0.0, 0.0], [2.0, 2.0], [50.0, 50.0], [51.0, 50.0]])
    m = FeatureMatrix(values, np.array([0, 0, 1, 1]), ("p", "q"), ("x", "y"))
    out, parents = smote(m, {"p": 3}, k=1, seed=1)
    s = out.values[-1]
    assert s[0] == s[1]
    assert 0.0 <= s[0] <= 2.0


def test_smote_segment_identity_property(rng):
    m = matrix_from({"A": 30, "B": 40}, n_numeric=5)
    out, parents = smote(m, {"A": 90, "B": 60}, k=5, seed=11)
    n_synth = len(parents)
    synth = out.values[m.rows:]
    for s, (xi, zi) in zip(synth, parents):
        x, z = m.values[xi], m.values[zi]
        d = np.linalg.norm
        assert abs(d(s - x) + d(s - z) - d(x - z)) <= 1e-9
    assert hist(out) == {"A": 90, "B": 60}
    assert n_synth == 80


def test_smote_needs_two_rows():
    m = matrix_from({"A": 1, "B": 5})
    with pytest.raises(DataError):
        smote(m, {"A": 4}, k=5, seed=0)


def test_smote_k_clamps_to_class_size():
    m = matrix_from({"A": 3, "B": 5})
    out, parents = smote(m, {"A": 10}, k=50, seed=0)
    assert hist(out)["A"] == 10


def test_stage_seed_streams_do_not_interfere():
    m = matrix_from({"A": 12, "B": 12})
    lone = undersample(m, {"A": 6}, seed=9)
    both = undersample(m, {"A": 6, "B": 12}, seed=9)
    a_lone = sorted(map(tuple, lone.values[lone.labels == 0]))
    a_both = sorted(map(tuple, both.values[both.labels == 0]))
    assert a_lone == a_both  # per-class streams derive from (seed, stage, class)


def test_apply_plan_stage_order_and_targets():
    m = matrix_from({"Big": 60, "Mid": 20, "Tiny": 4, "Single": 1})
    plan = BalancePlan(
        min_class_size=2,
        under_targets={"Big": 25},
        over_targets={"Tiny": 12},
        smote_targets={"Tiny": 20},
        smote_k=3,
        seed=2,
    )
    out, trace = apply_plan(m, plan)
    assert trace.removed_classes == ["Single"]
    assert dict(trace.after_under)["Big"] == 25
    assert dict(trace.after_over)["Tiny"] == 12
    assert dict(trace.after_smote) == {"Big": 25, "Mid": 20, "Tiny": 20}
    # staging matches running the stages one by one
    step, _ = remove_small_classes(m, 2)
    step = undersample(step, plan.under_targets, plan.seed)
    step = random_oversample(step, plan.over_targets, plan.seed)
    step, _ = smote(step, plan.smote_targets, plan.smote_k, plan.seed)
    assert np.array_equal(step.values, out.values)
    assert np.array_equal(step.labels, out.labels)


def test_apply_plan_empty_is_identity():
    m = matrix_from({"A": 9, "B": 5})
    out, trace = apply_plan(m, BalancePlan(min_class_size=1))
    assert np.array_equal(out.values, m.values)
    assert trace.after_smote == trace.initial


def test_apply_plan_deterministic():
    m = matrix_from({"A": 40, "B": 9})
    plan = BalancePlan(under_targets={"A": 20}, smote_targets={"B": 30}, seed=4)
    out1, _ = apply_plan(m, plan)
    out2, _ = apply_plan(m, plan)
    assert np.array_equal(out1.values, out2.values)
    assert np.array_equal(out1.labels, out2.labels)


def test_plan_validation():
    with pytest.raises(DataError):
        BalancePlan(under_targets={"A": 10}, over_targets={"A": 5})
    with pytest.raises(DataError):
        BalancePlan(over_targets={"A": 10}, smote_targets={"A": 5})
    with pytest.raises(DataError):
        BalancePlan(min_class_size=0)


def test_plan_json_roundtrip():
    plan = BalancePlan(min_class_size=3, under_targets={"A": 7},
                       over_targets={"B": 9}, smote_targets={"B": 12},
                       smote_k=4, seed=77)
    assert plan_from_json(plan_to_json(plan)) == plan


def test_builtin_plans_load():
    uwf = builtin_plan("uwf2022")
    assert uwf.min_class_size == 2
    assert uwf.under_targets["Benign traffic"] == 8874
    assert uwf.under_targets["Reconnaissance"] == 9176
    assert uwf.over_targets["Privilege Escalation"] == 130
    assert uwf.smote_targets["Privilege Escalation"] == 226
    cic = builtin_plan("cicids2017")
    assert cic.under_targets["Benign"] == 45426
    assert cic.over_targets["Heartbleed"] == 110
    assert cic.smote_targets["Heartbleed"] == 324
    with pytest.raises(KeyError):
        builtin_plan("nope")


UWF_DESK_COUNTS = {
    "Benign traffic": 9282, "Reconnaissance": 9279, "Discovery": 2086,
    "Credential Access": 31, "Privilege Escalation": 13, "Exfiltration": 7,
    "Lateral Movement": 4, "Resource Development": 3,
    "Defense Evasion": 1, "Initial Access": 1, "Persistence": 1,
}

UWF_FINAL = {
    "Benign traffic": 8874, "Reconnaissance": 9176, "Discovery": 2086,
    "Credential Access": 70, "Privilege Escalation": 226, "Exfiltration": 166,
    "Lateral Movement": 136, "Resource Development": 126,
}


def test_uwf_golden_plan_on_scaled_synthetic():
    m = matrix_from(UWF_DESK_COUNTS, n_numeric=4, seed=1)
    out, trace = apply_plan(m, builtin_plan("uwf2022"))
    assert trace.removed_classes == ["Defense Evasion", "Initial Access", "Persistence"]
    assert hist(out) == UWF_FINAL


CIC_DESK_COUNTS = {
    "Benign": 2273, "DoS Hulk": 231, "PortScan": 159, "DDoS": 128,
    "DoS GoldenEye": 103, "FTP-Patator": 79, "SSH-Patator": 59,
    "DoS slowloris": 58, "DoS Slowhttptest": 55, "Bot": 20,
    "Web Attack Brute Force": 15, "Web Attack XSS": 7, "Infiltration": 4,
    "Web Attack Sql Injection": 3, "Heartbleed": 2,
}


def test_cic_golden_plan_scaled():
    # same plan structure scaled by 1/10 so desk-scale counts satisfy it
    full = builtin_plan("cicids2017")
    scaled = BalancePlan(
        min_class_size=full.min_class_size,
        under_targets={"Benign": 454, "DoS Hulk": 230, "PortScan": 158,
                       "DDoS": 128, "FTP-Patator": 79, "Bot": 19},
        over_targets={"Web Attack XSS": 14, "Infiltration": 40,
                      "Web Attack Sql Injection": 21, "Heartbleed": 11},
        smote_targets={"FTP-Patator": 81, "SSH-Patator": 61, "DoS slowloris": 60,
                       "DoS Slowhttptest": 57, "Bot": 21, "Web Attack Brute Force": 17,
                       "Web Attack XSS": 15, "Infiltration": 57,
                       "Web Attack Sql Injection": 42, "Heartbleed": 32},
        smote_k=full.smote_k,
        seed=full.seed,
    )
    m = matrix_from(CIC_DESK_COUNTS, n_numeric=4, seed=2)
    out, trace = apply_plan(m, scaled)
    final = hist(out)
    for name, target in scaled.smote_targets.items():
        assert final[name] == target
    for name, target in scaled.under_targets.items():
        if name not in scaled.smote_targets:
            assert final[name] == target
    assert trace.removed_classes == []
