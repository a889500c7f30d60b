#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times each hot kernel on representative workloads, checks both paths return
identical results, then times a full forest training run per path in a
subprocess (the path is chosen at import via LOGHUNTER_NUMBA).

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from loghunter import kernels


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_scan_splits(rng, repeat):
    X = rng.normal(size=(4000, 8))
    y = rng.integers(0, 4, size=4000).astype(np.int64)
    fast_t, fast = timeit(kernels.NUMBA_IMPLS["scan_splits"], X, y, 4, repeat=repeat)
    slow_t, slow = timeit(kernels.NUMPY_IMPLS["scan_splits"], X, y, 4, repeat=repeat)
    assert fast == slow, "paths disagree on scan_splits"
    return "scan_splits 4000x8", fast_t, slow_t


def bench_tree_apply(rng, repeat):
    # a synthetic deep-ish tree over 200k rows
    n_nodes = 255
    feature = np.where(np.arange(n_nodes) < 127, np.arange(n_nodes) % 6, -1).astype(np.int64)
    threshold = rng.normal(size=n_nodes)
    left = np.where(feature >= 0, np.arange(n_nodes) * 2 + 1, -1).astype(np.int64)
    right = np.where(feature >= 0, np.arange(n_nodes) * 2 + 2, -1).astype(np.int64)
    X = rng.normal(size=(200_000, 6))
    fast_t, fast = timeit(kernels.NUMBA_IMPLS["tree_apply"],
                          feature, threshold, left, right, X, repeat=repeat)
    slow_t, slow = timeit(kernels.NUMPY_IMPLS["tree_apply"],
                          feature, threshold, left, right, X, repeat=repeat)
    assert np.array_equal(fast, slow), "paths disagree on tree_apply"
    return "tree_apply 200k rows", fast_t, slow_t


def bench_sq_dists(rng, repeat):
    A = rng.normal(size=(600, 12))
    fast_t, fast = timeit(kernels.NUMBA_IMPLS["sq_dists"], A, A, repeat=repeat)
    slow_t, slow = timeit(kernels.NUMPY_IMPLS["sq_dists"], A, A, repeat=repeat)
    assert np.array_equal(fast, slow), "paths disagree on sq_dists"
    return "sq_dists 600x600x12", fast_t, slow_t


TRAIN_SNIPPET = """
import time
import numpy as np
from loghunter import kernels
from loghunter.encode import FeatureMatrix
from loghunter.forest import ForestConfig, train

rng = np.random.default_rng(0)
X = np.vstack([rng.normal(0, 1, size=(1500, 8)), rng.normal(3, 1, size=(1500, 8))])
y = np.repeat(np.array([0, 1], np.int64), 1500)
m = FeatureMatrix(X, y, ("a", "b"), tuple(f"f{i}" for i in range(8)))
cfg = ForestConfig(n_trees=20, seed=0)
train(m, cfg)  # warm the jit before timing
t0 = time.perf_counter()
train(m, cfg)
print(f"{'numba' if kernels.USING_NUMBA else 'numpy'} {time.perf_counter() - t0:.4f}")
"""


def bench_full_train():
    rows = []
    for flag in ("1", "0"):
        env = dict(os.environ, LOGHUNTER_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", TRAIN_SNIPPET], env=env,
                             capture_output=True, text=True, check=True)
        path, seconds = out.stdout.split()
        rows.append((path, float(seconds)))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not kernels.NUMBA_AVAILABLE:
        print("numba is not active in this process (LOGHUNTER_NUMBA=0 or not "
              "installed); kernel comparison needs both paths.")
        return 1

    kernels.warmup()
    rng = np.random.default_rng(42)
    print(f"{'kernel':<24}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for bench in (bench_scan_splits, bench_tree_apply, bench_sq_dists):
        name, fast_t, slow_t = bench(rng, args.repeat)
        print(f"{name:<24}{fast_t * 1e3:>10.2f}ms{slow_t * 1e3:>10.2f}ms"
              f"{slow_t / fast_t:>9.1f}x")

    print()
    print("full train (forest of 20 trees, 3000x8), fresh process per path:")
    results = dict(bench_full_train())
    for path in ("numba", "numpy"):
        print(f"  {path}: {results[path]:.3f}s")
    print(f"  speedup: {results['numpy'] / results['numba']:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
