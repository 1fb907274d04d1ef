#!/usr/bin/env python3
"""Benchmark the hot kernels under the numba and numpy backends.

Run:  python benchmarks/bench_kernels.py [--size N] [--repeats R]

Backend selection uses the same SELFSIM_BACKEND mechanism as the library;
this script toggles the variable around each timed section and reports the
per-call wall time plus the speedup of the numba path.
"""

import argparse
import os
import time

import numpy as np

import selfsim as ss
from selfsim import _kernels, vorticity


def time_call(fn, repeats):
    fn()  # warm-up (numba compilation, caches)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_stencil(n, repeats):
    rng = np.random.default_rng(0)
    coef = tuple(rng.normal(size=(n, n)) for _ in range(9))
    f = rng.normal(size=(n, n))
    out = {}
    for mode in ("numpy", "numba"):
        os.environ["SELFSIM_BACKEND"] = mode
        if mode == "numba" and not _kernels.HAVE_NUMBA:
            out[mode] = None
            continue
        out[mode] = time_call(lambda: _kernels.apply_stencil(coef, f),
                              repeats)
    return out


def bench_transport(n, repeats):
    grid = ss.Grid2D(0.25, 0.75, 0.25, 0.75, n, n)
    b = ss.VectorField.from_function(grid, lambda x, y: -x, lambda x, y: -y)
    X, Y = grid.meshgrid()
    omega_b = ss.ScalarField(grid, 1.0 / np.hypot(X, Y))
    out = {}
    for mode in ("numpy", "numba"):
        os.environ["SELFSIM_BACKEND"] = mode
        if mode == "numba" and not _kernels.HAVE_NUMBA:
            out[mode] = None
            continue
        out[mode] = time_call(
            lambda: vorticity.transport_omega(b, omega_b), repeats)
    return out


def report(name, res):
    np_t, nb_t = res["numpy"], res["numba"]
    if nb_t is None:
        print(f"{name:<22} numpy {np_t * 1e3:8.2f} ms   numba unavailable")
        return
    print(f"{name:<22} numpy {np_t * 1e3:8.2f} ms   numba "
          f"{nb_t * 1e3:8.2f} ms   speedup {np_t / nb_t:5.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=257,
                    help="grid nodes per axis (default 257)")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    print(f"grid {args.size}x{args.size}, best of {args.repeats}")
    report("9-point stencil apply", bench_stencil(args.size, args.repeats))
    report("characteristic trace", bench_transport(args.size, args.repeats))


if __name__ == "__main__":
    main()
