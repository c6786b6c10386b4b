"""Benchmark the closed-loop simulation kernel: numba JIT vs pure numpy.

The step loop dominates sweeps and Monte Carlo studies, so this compares
both code paths on the same workload. Run from the repo root:

    python benchmarks/bench_sim.py --runs 200 --horizon 200

The JIT path also reports its one-off compile time (disk-cached between
processes). Select the numpy path package-wide with DELAYPRED_NO_NUMBA=1.
"""

import argparse
import time

import numpy as np

from delaypred import _kernels
from delaypred.model import PlantModel, build_augmented
from delaypred.predictors import compute_gains
from delaypred.simulate import make_disturbance

PLANT = PlantModel(A=[[0.0, 1.0], [3.2, -1.4]], B_u=[[0.0], [1.0]],
                   B_w=[[0.0], [1.0]], C=np.eye(2), D_w=np.zeros((2, 1)), d=5)
GAIN = np.array([[-0.3899, 3.2000, -0.0000], [1.0000, -0.7314, 0.8621]]).T
K = np.array([[-3.14, 1.5]])


def build_args(method, horizon):
    r = 0
    aug = build_augmented(PLANT, r)
    gains = compute_gains(PLANT, r, "modified" if method == "modified" else "standard")
    w = np.ascontiguousarray(
        make_disturbance("sinusoid", amplitude=0.6, rate=0.215).samples(horizon + PLANT.d))
    eta0 = np.array([1.5, 1.0, 0.0])
    return (PLANT.A, PLANT.B_u, PLANT.B_w, PLANT.C, PLANT.D_w,
            np.ascontiguousarray(aug.Abar), np.ascontiguousarray(aug.Bbar_u),
            np.ascontiguousarray(aug.Cbar), np.ascontiguousarray(GAIN), True,
            np.ascontiguousarray(gains.Ad), gains.ApowBu, gains.ApowBw,
            np.ascontiguousarray(gains.Gamma), K, w,
            np.zeros((PLANT.d, 1)), np.array([1.5, 1.0]), eta0,
            _kernels.METHOD_CODES[method], horizon)


def time_kernel(kernel, args, runs):
    best = np.inf
    t0 = time.perf_counter()
    for _ in range(runs):
        t1 = time.perf_counter()
        kernel(*args)
        best = min(best, time.perf_counter() - t1)
    total = time.perf_counter() - t0
    return total / runs, best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--runs", type=int, default=200)
    parser.add_argument("--horizon", type=int, default=200)
    parser.add_argument("--methods", default="modified,classical,wu2")
    args = parser.parse_args()
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]

    if _kernels.closed_loop_jit is None:
        print("numba unavailable or disabled (DELAYPRED_NO_NUMBA); only the numpy "
              "path will run")

    print(f"{args.runs} runs per method, horizon {args.horizon}\n")
    print(f"{'method':<10} {'numpy mean':>12} {'jit mean':>12} {'speedup':>8}")
    for method in methods:
        kargs = build_args(method, args.horizon)
        np_mean, _ = time_kernel(_kernels.closed_loop_numpy, kargs, args.runs)
        if _kernels.closed_loop_jit is not None:
            t0 = time.perf_counter()
            out_jit = _kernels.closed_loop_jit(*kargs)  # compile or cache load
            warm = time.perf_counter() - t0
            jit_mean, _ = time_kernel(_kernels.closed_loop_jit, kargs, args.runs)
            out_np = _kernels.closed_loop_numpy(*kargs)
            drift = max(np.max(np.abs(a - b)) for a, b in zip(out_np[:5], out_jit[:5]))
            print(f"{method:<10} {np_mean * 1e3:>10.3f}ms {jit_mean * 1e3:>10.3f}ms "
                  f"{np_mean / jit_mean:>7.1f}x   (first call {warm:.2f} s, "
                  f"max |diff| {drift:.2e})")
        else:
            print(f"{method:<10} {np_mean * 1e3:>10.3f}ms {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
