#!/usr/bin/env python3
"""Benchmark the transfer-time kernel backends (numba @njit vs pure numpy).

The transfer inversion runs once per chunk request, so it is the simulator's
hottest numeric kernel.  Run:

    python3 benchmarks/bench_kernels.py [--calls 200000]

MSDASH_NUMBA=0 would disable the jitted path package-wide; this script always
times both implementations directly.
"""
import argparse
import time

import numpy as np

from msdash._kernels import _transfer_time_loop, transfer_time_numpy

try:
    from numba import njit

    transfer_time_numba = njit(cache=True)(_transfer_time_loop)
except ImportError:
    transfer_time_numba = None


def make_workload(calls: int, samples: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    offsets = np.arange(samples, dtype=np.float64)  # 1 s granularity
    kbps = rng.uniform(100.0, 8000.0, size=samples)
    duration = float(samples)
    starts = rng.uniform(0.0, 10.0 * duration, size=calls)
    kbits = rng.uniform(1e3, 1.5e5, size=calls)  # ~small chunk .. 8000 Kbps * 4 s
    return offsets, kbps, duration, starts, kbits


def bench(fn, offsets, kbps, duration, starts, kbits):
    t0 = time.perf_counter()
    acc = 0.0
    for s, b in zip(starts, kbits):
        acc += fn(offsets, kbps, duration, s, b)
    return time.perf_counter() - t0, acc


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--calls", type=int, default=200_000)
    parser.add_argument("--samples", type=int, default=400, help="trace samples")
    args = parser.parse_args()

    offsets, kbps, duration, starts, kbits = make_workload(args.calls, args.samples)

    print(f"workload: {args.calls} transfers over a {args.samples}-sample trace")

    t_np, acc_np = bench(transfer_time_numpy, offsets, kbps, duration, starts, kbits)
    print(f"numpy backend : {t_np:8.3f}s  ({1e6 * t_np / args.calls:7.2f} us/call)")

    if transfer_time_numba is None:
        print("numba backend : unavailable (numba not importable)")
        return

    transfer_time_numba(offsets, kbps, duration, 0.0, 100.0)  # compile outside timing
    t_nb, acc_nb = bench(transfer_time_numba, offsets, kbps, duration, starts, kbits)
    print(f"numba backend : {t_nb:8.3f}s  ({1e6 * t_nb / args.calls:7.2f} us/call)")
    print(f"speedup       : {t_np / t_nb:8.2f}x")
    match = np.isclose(acc_np, acc_nb, rtol=1e-9)
    print(f"results match : {bool(match)} (sums {acc_np:.6f} vs {acc_nb:.6f})")


if __name__ == "__main__":
    main()
