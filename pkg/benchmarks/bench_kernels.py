#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--quick]

Covers the two hot paths: row-wise spherical interpolation (the inner
loop of morph generation and alpha sweeps) and uint8 sum-of-squared
errors (the inner loop of PSNR batches).
"""

import argparse
import time

import numpy as np

from morphlab._kernels import _fallback

try:
    from morphlab._kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_slerp(impl, rows, cols, repeats):
    rng = np.random.default_rng(1)
    u = rng.normal(size=(rows, cols))
    v = rng.normal(size=(rows, cols))
    out = np.empty_like(u)
    return timeit(lambda: impl.slerp_rows(u, v, 0.37, 1e-7, out), repeats)


def bench_sse(impl, n, repeats):
    rng = np.random.default_rng(2)
    a = rng.integers(0, 256, size=n).astype(np.uint8)
    b = rng.integers(0, 256, size=n).astype(np.uint8)
    return timeit(lambda: impl.sse_u8(a, b), repeats)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller sizes, fewer repeats")
    args = parser.parse_args()

    repeats = 3 if args.quick else 7
    slerp_rows = 2_000 if args.quick else 20_000  # ~1k morphs' worth of style rows
    sse_n = 3 * 512 * 512 if args.quick else 3 * 1024 * 1024  # one RGB frame

    cases = [
        ("slerp_rows", f"({slerp_rows} x 512 rows)",
         lambda impl: bench_slerp(impl, slerp_rows, 512, repeats)),
        ("sse_u8", f"({sse_n} samples)",
         lambda impl: bench_sse(impl, sse_n, repeats)),
    ]

    print(f"{'kernel':<12} {'size':<24} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for name, size, runner in cases:
        py = runner(_fallback)
        if _core is None:
            print(f"{name:<12} {size:<24} {py * 1e3:>10.2f}ms {'n/a':>12} {'n/a':>9}")
            continue
        cy = runner(_core)
        print(
            f"{name:<12} {size:<24} {py * 1e3:>10.2f}ms {cy * 1e3:>10.2f}ms "
            f"{py / cy:>8.1f}x"
        )
    if _core is None:
        print("\ncompiled extension not available; showing fallback only")


if __name__ == "__main__":
    main()
