"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--n 8] [--instances 5] [--sa-iters 20000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pdpha import _kernels_py
from pdpha.baselines import nearest_neighbor, time_matrix
from pdpha.instances import GeneratorConfig, generate_many

try:
    from pdpha import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=7, help="pairs per instance for the DP timing")
    ap.add_argument("--sa-n", type=int, default=10)
    ap.add_argument("--instances", type=int, default=3)
    ap.add_argument("--sa-iters", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = [("python", _kernels_py)] + ([("cython", _kernels)] if _kernels else [])
    if _kernels is None:
        print("compiled extension not importable; timing the fallback only")

    dp_insts = generate_many(GeneratorConfig(n=args.n, seed=0), args.instances)
    sa_insts = generate_many(GeneratorConfig(n=args.sa_n, seed=1), args.instances)
    draws = np.random.default_rng(0).random((args.sa_iters, 4))
    rows = []
    for name, mod in backends:
        dp = sum(best_of(lambda: mod.dp_solve(time_matrix(i), i.n), args.repeat) for i in dp_insts)
        sa = 0.0
        for i in sa_insts:
            T = time_matrix(i)
            start = np.array(nearest_neighbor(i)[0])
            sa += best_of(lambda: mod.sa_run(T, i.n, start, draws, 0.3, 0.999, 1, False), args.repeat)
        rows.append((name, dp / len(dp_insts), sa / len(sa_insts)))

    print(f"{'backend':<8} {'dp n=' + str(args.n) + ' (s)':>14} {'sa n=' + str(args.sa_n) + ' (s)':>14}")
    for name, dp, sa in rows:
        print(f"{name:<8} {dp:>14.4f} {sa:>14.4f}")
    if len(rows) == 2:
        print(f"speed-up: dp x{rows[0][1] / rows[1][1]:.1f}, sa x{rows[0][2] / rows[1][2]:.1f}")


if __name__ == "__main__":
    main()
