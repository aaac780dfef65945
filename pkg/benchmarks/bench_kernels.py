"""Benchmark the hot kernels: numba JIT vs pure numpy.

Times the transport solver and the fine-similarity scorer on pair sizes
typical for retrieval (tokens x atoms/motifs around a few dozen rows) and
prints per-call times plus the speedup. Run:

    python benchmarks/bench_kernels.py [--repeats 200]

The active default backend follows ORMA_NUMBA (the same flag the package
honors); both flavors are always benchmarked explicitly here.
"""

import argparse
import time

import numpy as np

from orma import kernels


def bench(fn, args, repeats):
    fn(*args)  # warmup / JIT
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    if not kernels.USING_NUMBA:
        print("note: numba backend inactive (ORMA_NUMBA=0 or numba missing); "
              "comparing numpy against itself is uninformative")

    rng = np.random.default_rng(0)
    rows = [("kernel", "size", "numpy", "numba", "speedup")]

    for n, m in ((16, 4), (64, 8), (256, 16)):
        cost = rng.uniform(0.0, 2.0, (n, m))
        mu = np.full(n, 1.0 / n)
        nu = np.full(m, 1.0 / m)
        call = (cost, mu, nu, 50, 1, 1.0, 1e-6)
        t_np = bench(kernels.ipot_solve_numpy, call, args.repeats)
        t_nb = (bench(kernels.ipot_solve, call, args.repeats)
                if kernels.USING_NUMBA else float("nan"))
        rows.append(("ipot_solve", f"{n}x{m}", f"{t_np * 1e6:8.1f}us",
                     f"{t_nb * 1e6:8.1f}us", f"{t_np / t_nb:6.1f}x"))

    for r, c, d in ((16, 16, 300), (64, 32, 300), (256, 64, 300)):
        x = rng.normal(size=(r, d))
        y = rng.normal(size=(c, d))
        t_np = bench(kernels.fine_similarity_numpy, (x, y), args.repeats)
        t_nb = (bench(kernels.fine_similarity_value, (x, y), args.repeats)
                if kernels.USING_NUMBA else float("nan"))
        rows.append(("fine_similarity", f"{r}x{c}x{d}", f"{t_np * 1e6:8.1f}us",
                     f"{t_nb * 1e6:8.1f}us", f"{t_np / t_nb:6.1f}x"))

    widths = [max(len(str(row[i])) for row in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(str(cell).ljust(widths[i]) for i, cell in enumerate(row)))


if __name__ == "__main__":
    main()
