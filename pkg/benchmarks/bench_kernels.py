#!/usr/bin/env python3
"""Time the two hot kernels under the compiled and pure-numpy backends.

The library selects its backend at import time (numba when available,
numpy when KLWALK_NO_NUMBA=1 or numba is missing); both implementations
stay importable, so this script races them directly on the shapes the
tracking experiment actually produces: the eigenproblem power iteration
on the 10x10-grid passive kernel and a long chain simulation.

Usage: python benchmarks/bench_kernels.py [--n 100] [--steps 200000]
"""

import argparse
import time

import numpy as np

from klwalk import CostFunction, ExperimentSpec, grid_graph, solve_mpe
from klwalk._accel import (
    NUMBA_ENABLED,
    log_rows,
    markov_path,
    markov_path_numpy,
    mpe_power_iteration,
    mpe_power_iteration_numpy,
)


def time_best_of(fn, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_mpe(n_side):
    spec = ExperimentSpec(graph=grid_graph(n_side, n_side))
    passive = spec.passive()
    rng = np.random.default_rng(0)
    f = rng.random(passive.n)
    lp = log_rows(passive.rows)

    def run(fn):
        return fn(lp, f, 0, 1e-12, 100_000)

    if NUMBA_ENABLED:
        run(mpe_power_iteration)  # compile outside the timed region
    selected_t, selected = time_best_of(lambda: run(mpe_power_iteration))
    numpy_t, fallback = time_best_of(lambda: run(mpe_power_iteration_numpy))
    assert abs(selected[1] - fallback[1]) < 1e-9  # same certified bracket
    iters = selected[3]
    return selected_t, numpy_t, iters, passive.n


def bench_path(n, steps):
    rng = np.random.default_rng(1)
    rows = rng.dirichlet(np.ones(n), size=n)
    cdf = np.cumsum(rows, axis=1)
    uniforms = rng.random(steps)
    if NUMBA_ENABLED:
        markov_path(cdf, 0, uniforms[:10])
    selected_t, a = time_best_of(lambda: markov_path(cdf, 0, uniforms), repeats=3)
    numpy_t, b = time_best_of(lambda: markov_path_numpy(cdf, 0, uniforms), repeats=3)
    assert np.array_equal(a, b)  # identical draws, identical paths
    return selected_t, numpy_t


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--grid-side", type=int, default=10)
    parser.add_argument("--steps", type=int, default=200_000)
    args = parser.parse_args()

    backend = "numba" if NUMBA_ENABLED else "numpy (fallback selected)"
    print(f"selected backend: {backend}")

    mpe_sel, mpe_np, iters, n = bench_mpe(args.grid_side)
    print(f"\npower iteration on the {n}-state grid passive "
          f"({iters} iterations to a 1e-12 bracket):")
    print(f"  selected backend : {mpe_sel * 1e3:9.2f} ms")
    print(f"  numpy fallback   : {mpe_np * 1e3:9.2f} ms   "
          f"(x{mpe_np / mpe_sel:.1f} vs selected)")

    path_sel, path_np = bench_path(n, args.steps)
    print(f"\nchain simulation, {args.steps} steps on {n} states:")
    print(f"  selected backend : {path_sel * 1e3:9.2f} ms")
    print(f"  numpy fallback   : {path_np * 1e3:9.2f} ms   "
          f"(x{path_np / path_sel:.1f} vs selected)")

    solve_t, _ = time_best_of(
        lambda: solve_mpe(
            ExperimentSpec(graph=grid_graph(args.grid_side, args.grid_side)).passive(),
            CostFunction(np.random.default_rng(0).random(n)),
        ),
        repeats=3,
    )
    print(f"\nend-to-end certified solve (checks included): {solve_t * 1e3:.2f} ms")
    print("\nrun with KLWALK_NO_NUMBA=1 to force the whole library onto the fallback.")


if __name__ == "__main__":
    main()
