#!/usr/bin/env python3
"""Time each hot kernel under the numpy and numba backends.

Both implementations are called directly from ``morphguard.kernels.KERNELS``,
so a single process compares them regardless of MORPHGUARD_DISABLE_NUMBA.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--scale 1.0]
"""

import argparse
import time

import numpy as np

from morphguard._backend import HAS_NUMBA
from morphguard.kernels import KERNELS


def median_time(fn, args, repeat, warmup=2):
    for _ in range(warmup):  # first numba call compiles (or loads the cache)
        fn(*args)
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def workloads(scale, rng):
    n = int(100_000 * scale)
    m = 127
    z = rng.beta(m / 2, m / 2, n)
    u = rng.random(n)
    x = rng.standard_normal((max(1, n // 4), 128))
    mu = rng.standard_normal(128)
    mu /= np.linalg.norm(mu)
    # segments shaped like per-attack score tables: 125 attacks x 2 slots x 24 probes, repeated
    counts = rng.integers(1, 48, size=max(2, n // 24))
    bounds = np.concatenate([[0], np.cumsum(counts)])
    values = rng.uniform(0, np.pi, bounds[-1])
    scores = rng.uniform(0, np.pi, n * 10)
    return {
        "wood_proposals": (z, u, 250.0, m),
        "householder_rotate": (x, mu),
        "segment_min": (values, bounds),
        "segment_kth_smallest": (values, bounds, 2),
        "uniform_histogram": (scores, 0.0, np.pi, 50),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--scale", type=float, default=1.0, help="Multiply workload sizes.")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<22}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}")
    for name, call_args in workloads(args.scale, rng).items():
        numpy_impl, numba_impl = KERNELS[name]
        t_np = median_time(numpy_impl, call_args, args.repeat)
        if HAS_NUMBA and numba_impl is not None:
            t_nb = median_time(numba_impl, call_args, args.repeat)
            print(f"{name:<22}{t_np * 1e3:>11.3f}{t_nb * 1e3:>11.3f}{t_np / t_nb:>8.2f}x")
        else:
            print(f"{name:<22}{t_np * 1e3:>11.3f}{'n/a':>11}{'':>9}")


if __name__ == "__main__":
    main()
