#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the four hot kernels on a workload shaped like the bundled sample
run (panel-sized training matrix, scenario-sized prediction batch) and
prints per-kernel timings plus speedups. Both backends produce identical
results, so this is purely a throughput comparison.

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from kscale._backend import available_backends


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="fewer repeats")
    args = parser.parse_args()
    repeats = 2 if args.quick else 5

    backends = available_backends()
    if len(backends) < 2:
        print("compiled backend not built; nothing to compare "
              f"(available: {list(backends)})")
        return

    rng = np.random.default_rng(0)
    n, p = 1716, 10  # bundled panel shape
    X = np.ascontiguousarray(rng.normal(size=(n, p)))
    y = np.ascontiguousarray(X[:, 0] * 3 + rng.normal(size=n) * 0.2)
    idx = rng.integers(0, n, size=n).astype(np.int64)
    Xq = np.ascontiguousarray(rng.normal(size=(6720, p)))  # scenario batch
    tree = backends["python"].build_tree(X, y, idx, 4, 2, 2**31 - 1, 42, 0)
    z = rng.normal(size=2000)
    phi = np.array([0.5, -0.2])
    theta = np.array([0.3])

    n_build = 3 if args.quick else 10
    cases = {
        "build_tree (panel, x{})".format(n_build): lambda mod: [
            mod.build_tree(X, y, idx, 4, 2, 2**31 - 1, seed, 0)
            for seed in range(n_build)],
        "predict_tree (6720 rows)": lambda mod: mod.predict_tree(
            tree[0], tree[1], tree[2], tree[3], tree[4], Xq),
        "tree_shap (256 rows)": lambda mod: mod.tree_shap(
            tree[0], tree[1], tree[2], tree[3], tree[4], tree[5],
            Xq[:256], p),
        "css_innovations (n=2000, x200)": lambda mod: [
            mod.css_innovations(z, 0.1, phi, theta, float(z.mean()))
            for _ in range(200)],
    }

    print(f"{'kernel':34s} {'python':>10s} {'compiled':>10s} {'speedup':>9s}")
    for name, runner in cases.items():
        times = {}
        for bname, mod in backends.items():
            times[bname] = timeit(lambda m=mod: runner(m), repeats)
        speedup = times["python"] / times["compiled"]
        print(f"{name:34s} {times['python'] * 1e3:9.1f}ms "
              f"{times['compiled'] * 1e3:9.1f}ms {speedup:8.1f}x")

    # sanity: identical outputs regardless of backend
    a = backends["python"].predict_tree(tree[0], tree[1], tree[2], tree[3],
                                        tree[4], Xq)
    b = backends["compiled"].predict_tree(tree[0], tree[1], tree[2], tree[3],
                                          tree[4], Xq)
    assert np.array_equal(a, b)
    print("\nresult check: backends agree bit-for-bit on predictions")


if __name__ == "__main__":
    main()
