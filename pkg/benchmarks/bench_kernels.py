#!/usr/bin/env python3
"""Timing comparison of the compiled kernel extension vs the pure-NumPy
fallback on the three hot denoising kernels.

Usage: python benchmarks/bench_kernels.py [--size 32] [--repeats 20]
"""

import argparse
import time

import numpy as np

from perturbench import _kernels_np


def _bench(fn, *args, repeats: int) -> float:
    fn(*args)  # warmup
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    try:
        from perturbench import _kernels as compiled
    except ImportError:
        compiled = None
        print("compiled extension not available; showing pure-NumPy times only")

    plane = np.random.default_rng(0).random((args.size, args.size))
    cases = [
        ("median 3x3", "median_filter_2d", (plane, 3)),
        ("nlm 7/23 (h=0.07)", "nlm_2d", (plane, 7, 23, 0.07, 0.05)),
        ("tv chambolle (w=0.1)", "tv_chambolle_2d", (plane, 0.1, 2e-4, 200)),
    ]

    header = f"{'kernel':<24}{'numpy':>12}"
    if compiled:
        header += f"{'compiled':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, fn_name, fargs in cases:
        t_np = _bench(getattr(_kernels_np, fn_name), *fargs, repeats=args.repeats)
        line = f"{label:<24}{t_np * 1e3:>10.2f}ms"
        if compiled:
            t_cy = _bench(getattr(compiled, fn_name), *fargs, repeats=args.repeats)
            line += f"{t_cy * 1e3:>10.2f}ms{t_np / t_cy:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
