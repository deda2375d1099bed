"""Time the compiled and pure-Python block kernels.

Single samples (the ``estimate`` commands, ``adaptive_estimate``) and
Monte Carlo batches stress the kernels differently, so both are timed;
``auto`` is the default dispatch, which switches to numpy at
``ROW_CROSSOVER`` rows.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from robust_pwm import _kernels
from robust_pwm.estimators import MomConfig, block_weight_matrix, partition_blocks


SHAPES = [(200, 0.05, 3, 4), (2000, 0.05, 4, 4), (1200, np.exp(-12), 2, 3)]


def cases(row_counts):
    for rows in row_counts:
        for n, delta, k, m in SHAPES:
            part = partition_blocks(n, MomConfig(delta), m)
            X = np.random.default_rng(0).standard_normal((rows, n))
            W = block_weight_matrix(part, k, m)
            yield f"R={rows:<5d} n={n:<5d} K={part.K:<3d} ({k},{m})", X, part, W


def time_call(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number * 1e3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, nargs="+", default=[1, 10, 100, 1000], help="batch sizes")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["python"] + (["compiled", "auto"] if _kernels._core is not None else [])
    print(f"extension available: {_kernels._core is not None}; crossover: {_kernels.ROW_CROSSOVER} rows")
    print(f"{'case':<34}" + "".join(f"{b + ' (ms)':>16}" for b in backends) + f"{'compiled speed-up':>19}")
    for label, X, part, W in cases(args.rows):
        times = {}
        for b in backends:
            times[b] = time_call(
                lambda: _kernels.block_weighted_sums(X, part.order, part.offsets, W, backend=b), args.repeat)
        ratio = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:<34}" + "".join(f"{times[b]:>16.3f}" for b in backends) + f"{ratio:>18.2f}x")


if __name__ == "__main__":
    main()
