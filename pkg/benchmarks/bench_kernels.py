#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy reference backend.

Times the two hot paths of a fit: full-model orientation sweeps over a mark
grid and the misfit objective.  Run after building the extension:

    python3 setup.py build_ext --inplace
    python3 benchmarks/bench_kernels.py
"""

import argparse
import math
import time

import numpy as np

from xqdof import kernels
from xqdof.kernels import _reference


def make_workload(n_points: int, n_anchors: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0, 480, n_points)
    ys = rng.uniform(0, 480, n_points)
    thetas = rng.uniform(-math.pi / 2, math.pi / 2, n_points)
    cores = np.array([30 + 200j, 80 + 250j])
    deltas = np.array([-60 + 90j, 120 + 80j])
    anchors = np.column_stack([
        rng.uniform(0, 480, n_anchors), rng.uniform(0, 480, n_anchors),
        rng.uniform(-math.pi / 2, math.pi / 2, n_anchors),
        rng.uniform(10, 60, n_anchors), rng.uniform(10, 60, n_anchors),
    ])
    args = (xs, ys, 180.0, 1.1, 0.1, 240.0, 30.0, cores, deltas, anchors, 0, 0.0)
    return args, thetas


def time_call(fn, *args, repeats: int = 5, min_seconds: float = 0.2) -> float:
    fn(*args)  # warm up
    n = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(n):
            fn(*args)
        dt = time.perf_counter() - t0
        if dt >= min_seconds:
            break
        n *= 2
    best = dt / n
    for _ in range(repeats - 1):
        t0 = time.perf_counter()
        for _ in range(n):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / n)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=1600)
    parser.add_argument("--anchors", type=int, nargs="*", default=[0, 5, 20])
    args = parser.parse_args()

    backends = kernels.backends()
    if "compiled" not in backends:
        print("compiled backend not built; run `python3 setup.py build_ext --inplace`")
        print("timing the reference backend only\n")

    print(f"workload: {args.points} points per sweep\n")
    header = f"{'kernel':<28}{'anchors':>8}" + "".join(
        f"{name:>14}" for name in backends) + ("{:>10}".format("speedup") if len(backends) > 1 else "")
    print(header)
    print("-" * len(header))
    for n_anchors in args.anchors:
        work, thetas = make_workload(args.points, n_anchors)
        times = {}
        for name, mod in backends.items():
            times[name] = time_call(mod.xqd_orientations, *work)
        row = f"{'xqd_orientations':<28}{n_anchors:>8}"
        for name in backends:
            row += f"{times[name] * 1e3:>11.3f} ms"
        if len(backends) > 1:
            row += f"{times['reference'] / times['compiled']:>9.1f}x"
        print(row)

    angles = _reference.xqd_orientations(*make_workload(args.points, 5)[0])
    times = {name: time_call(mod.objective_sum, angles, thetas)
             for name, mod in backends.items()}
    row = f"{'objective_sum':<28}{'-':>8}"
    for name in backends:
        row += f"{times[name] * 1e3:>11.3f} ms"
    if len(backends) > 1:
        row += f"{times['reference'] / times['compiled']:>9.1f}x"
    print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
