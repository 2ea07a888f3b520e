"""Time the compiled evolution kernel against the pure-numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py --steps 4000 --repeat 3
"""

import argparse
import time

import numpy as np

from pqwalk import kernels
from pqwalk.lattice import SQRT_HALF, CoinOperator
from pqwalk.policy import StepPolicy, generate_sequence


def _setup(T, p, seed):
    lengths = np.asarray(generate_sequence(StepPolicy("I", p), T, seed), dtype=np.int64)
    x_max = 2 * T
    a = np.zeros(2 * x_max + 1)
    b = np.zeros_like(a)
    a[x_max] = b[x_max] = SQRT_HALF
    series = np.zeros((T + 1, kernels.N_SERIES))
    snaps = np.zeros((0, a.size))
    return a, b, x_max, lengths, series, snaps


def time_kernel(fn, T, p, seed, repeat):
    coin = CoinOperator.hadamard().matrix.real.copy()
    best, out = np.inf, None
    for _ in range(repeat):
        a, b, x_max, lengths, series, snaps = _setup(T, p, seed)
        t0 = time.perf_counter()
        fn(a, b, x_max, lengths, coin, 1, np.zeros(0, np.int64), series, snaps)
        best = min(best, time.perf_counter() - t0)
        out = series
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rows = []
    if kernels.evolve_numba is not None:
        time_kernel(kernels.evolve_numba, 8, args.p, args.seed, 1)  # compile outside the timing
        rows.append(("numba",) + time_kernel(kernels.evolve_numba, args.steps, args.p,
                                             args.seed, args.repeat))
    rows.append(("numpy",) + time_kernel(kernels._evolve_numpy, args.steps, args.p,
                                         args.seed, args.repeat))
    print(f"T={args.steps} p={args.p} per-step recording, best of {args.repeat}")
    for name, secs, _ in rows:
        print(f"  {name:6s} {secs * 1e3:9.1f} ms   {secs / args.steps * 1e6:7.2f} us/step")
    if len(rows) == 2:
        diff = np.abs(rows[0][2] - rows[1][2]).max()
        print(f"  speedup {rows[1][1] / rows[0][1]:.1f}x, max series difference {diff:.2e}")


if __name__ == "__main__":
    main()
