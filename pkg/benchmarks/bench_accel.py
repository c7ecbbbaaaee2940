#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the pairwise assembly routines on sizes where they dominate a grid
sweep, plus one end-to-end kernel-matrix build.  Run directly:

    python benchmarks/bench_accel.py
"""

import time

import numpy as np

from flatgp import Kernel, kernel_matrix
from flatgp import accel


def timeit(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    print(f"numba active: {accel.using_numba()}")
    if not accel.using_numba():
        print("set FLATGP_NUMBA=1 (and install numba) to benchmark the compiled path")
    accel.warmup()

    rows = []
    for n in (512, 2048):
        for d in (1, 3):
            X = np.random.default_rng(0).normal(size=(n, d))
            if accel.using_numba():
                t_nb = timeit(accel._nb_pairwise_sq_dists, X)
                t_nb_pow = timeit(accel._nb_pairwise_dist_power, X, 3.0)
            else:
                t_nb = t_nb_pow = float("nan")
            t_np = timeit(accel._np_pairwise_sq_dists, X)
            t_np_pow = timeit(accel._np_pairwise_dist_power, X, 3.0)
            rows.append((f"sq_dists n={n} d={d}", t_nb, t_np))
            rows.append((f"dist_power n={n} d={d}", t_nb_pow, t_np_pow))

    X = np.random.default_rng(1).normal(size=(2048, 2))
    kern = Kernel.gaussian(epsilon=0.7)
    rows.append(("kernel_matrix n=2048 d=2", timeit(kernel_matrix, kern, X), float("nan")))

    print(f"{'case':30s} {'numba (ms)':>12s} {'numpy (ms)':>12s} {'speedup':>9s}")
    for label, t_nb, t_np in rows:
        speed = t_np / t_nb if t_nb == t_nb and t_np == t_np else float("nan")
        nb = f"{1e3 * t_nb:12.3f}" if t_nb == t_nb else " " * 12
        np_ = f"{1e3 * t_np:12.3f}" if t_np == t_np else " " * 12
        sp = f"{speed:9.2f}" if speed == speed else " " * 9
        print(f"{label:30s} {nb} {np_} {sp}")


if __name__ == "__main__":
    main()
