import numpy as np
import pytest

from loghunter.ingest import ClassSynth, SynthSpec, synthesize
from loghunter.schema import (ClassEntry, ClassRegistry, ColumnSpec,
                              DatasetProfile)


def demo_columns(n_numeric=4, extras=True):
    cols = [ColumnSpec(f"f{i}", "numeric", "float64") for i in range(n_numeric)]
    if extras:
        cols += [
            ColumnSpec("proto", "categorical", "text"),
            ColumnSpec("src_ip", "ipv4", "text"),
            ColumnSpec("seen_at", "timestamp", "float64"),
            ColumnSpec("is_local", "boolean", "bool"),
        ]
    return tuple(cols)


def demo_profile(n_numeric=4, extras=True, class_names=("Benign", "Probe", "Flood")):
    entries = []
    for i, name in enumerate(class_names):
        tactics = ("Desired traffic",) if name.lower().startswith("benign") else (f"T1{i:03d}",)
        entries.append(ClassEntry(name, tactics))
    return DatasetProfile(
        name="demo",
        columns=demo_columns(n_numeric, extras),
        label_column="label",
        classes=ClassRegistry(tuple(entries)),
    )


def demo_table(counts, n_numeric=4, extras=True, seed=42, separation=6.0):
    """Synthetic table with one Gaussian blob per class. counts maps
    class name -> rows; blob centers sit `separation` apart per class."""
    class_specs = tuple(
        ClassSynth(name, count, tuple([separation * i] * n_numeric), 1.0)
        for i, (name, count) in enumerate(counts.items())
    )
    spec = SynthSpec(class_specs, demo_columns(n_numeric, extras), seed)
    return synthesize(spec)


@pytest.fixture
def profile3():
    return demo_profile()


@pytest.fixture
def table3(profile3):
    return demo_table({"Benign": 60, "Probe": 30, "Flood": 10})


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    from loghunter import kernels

    kernels.warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
