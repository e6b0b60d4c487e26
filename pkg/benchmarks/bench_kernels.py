#!/usr/bin/env python3
"""Benchmark the compiled kernel lane against the pure-numpy fallback.

The row-wise kernels dominate the recurrence's non-GEMM time; matmul is BLAS
in both lanes, so it is reported once as a reference point.

Usage:
    python benchmarks/bench_kernels.py [--repeats 200] [--rows 16384] [--cols 16]
"""

import argparse
import time

import numpy as np

from latentvote.tensor import available_lanes, backend_name


def _time(fn, repeats):
    fn()
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best * 1e6  # us


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--rows", type=int, default=16384)
    parser.add_argument("--cols", type=int, default=16)
    args = parser.parse_args()

    lanes = available_lanes()
    print(f"active lane: {backend_name()}; lanes available: {sorted(lanes)}")
    if "compiled" not in lanes:
        print("compiled lane not built; showing the python lane alone")

    gen = np.random.default_rng(0)
    x = gen.standard_normal((args.rows, args.cols)).astype(np.float32)
    g = gen.standard_normal((args.rows, args.cols)).astype(np.float32)
    gain = gen.standard_normal(args.cols).astype(np.float32)

    cases = {}
    for name, mod in lanes.items():
        y = mod.softmax_fwd(x)
        yl = mod.log_softmax_fwd(x)
        _, inv = mod.rmsnorm_fwd(x, gain, 1e-6)
        yu, invu = mod.unit_normalize_fwd(x)
        cases[name] = {
            "softmax_fwd": lambda m=mod: m.softmax_fwd(x),
            "softmax_bwd": lambda m=mod, y=y: m.softmax_bwd(y, g),
            "log_softmax_fwd": lambda m=mod: m.log_softmax_fwd(x),
            "rmsnorm_fwd": lambda m=mod: m.rmsnorm_fwd(x, gain, 1e-6),
            "rmsnorm_bwd": lambda m=mod, inv=inv: m.rmsnorm_bwd(x, gain, inv, g),
            "silu_fwd": lambda m=mod: m.silu_fwd(x),
            "silu_bwd": lambda m=mod: m.silu_bwd(x, g),
            "unit_normalize_fwd": lambda m=mod: m.unit_normalize_fwd(x),
            "unit_normalize_bwd": lambda m=mod, yu=yu, invu=invu: m.unit_normalize_bwd(yu, invu, g),
        }

    kernel_names = list(next(iter(cases.values())))
    width = max(len(n) for n in kernel_names)
    header = f"{'kernel':{width}s}  " + "  ".join(f"{lane:>12s}" for lane in cases)
    if len(cases) == 2:
        header += "  speedup"
    print(f"\nshape {args.rows}x{args.cols}, best of 5 x {args.repeats} runs (us/call)")
    print(header)
    for kname in kernel_names:
        times = {lane: _time(cases[lane][kname], args.repeats) for lane in cases}
        row = f"{kname:{width}s}  " + "  ".join(f"{times[lane]:12.1f}" for lane in cases)
        if "python" in times and "compiled" in times:
            row += f"  {times['python'] / times['compiled']:7.2f}x"
        print(row)

    w = gen.standard_normal((args.cols, args.cols)).astype(np.float32)
    t = _time(lambda: x @ w, args.repeats)
    print(f"\nmatmul [{args.rows}x{args.cols}]@[{args.cols}x{args.cols}] "
          f"(BLAS, shared by both lanes): {t:.1f} us/call")


if __name__ == "__main__":
    main()
