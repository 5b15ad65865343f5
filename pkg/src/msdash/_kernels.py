"""Transfer-time kernels over piecewise-constant bandwidth traces.

The chunk-transfer integral is the one numeric inner loop the simulator hits
on every request, so it ships in two interchangeable backends:

* a numba ``@njit`` scalar loop (default when numba imports), and
* a vectorised pure-numpy path.

Selection is driven by the ``MSDASH_NUMBA`` environment variable at import
time: ``0``/``false``/``off`` forces the numpy path, ``1``/``true``/``on``
requires numba (import errors surface), anything else tries numba and falls
back silently.  ``benchmarks/bench_kernels.py`` compares the two.

All kernels take the trace as plain arrays: strictly increasing sample
offsets (seconds, starting at 0), per-sample bandwidth (Kbps), and the total
circulated duration (seconds, = last offset + granularity).  Traces wrap
modulo their duration.
"""
from __future__ import annotations

import math
import os

import numpy as np


def _transfer_time_loop(offsets, kbps, duration, start, kbits):
    """Seconds to move `kbits` starting at absolute trace time `start`."""
    n = offsets.shape[0]
    # Skip whole trace cycles up front so pathological (tiny-bandwidth)
    # transfers stay O(n) instead of O(n * cycles).
    total_cap = 0.0
    for i in range(n):
        end = offsets[i + 1] if i + 1 < n else duration
        total_cap += kbps[i] * (end - offsets[i])

    t = start % duration
    i = int(np.searchsorted(offsets, t, side="right")) - 1
    elapsed = 0.0
    remaining = kbits

    # First (possibly partial) interval, then walk sample by sample.
    while remaining > 0.0:
        end = offsets[i + 1] if i + 1 < n else duration
        span = end - t
        cap = kbps[i] * span
        if remaining <= cap:
            return elapsed + remaining / kbps[i]
        remaining -= cap
        elapsed += span
        i += 1
        if i == n:
            i = 0
            if remaining >= total_cap:
                cycles = math.floor(remaining / total_cap)
                elapsed += cycles * duration
                remaining -= cycles * total_cap
        t = offsets[i]
    return elapsed


def transfer_time_numpy(offsets, kbps, duration, start, kbits):
    """Vectorised equivalent of the scalar loop (cumulative-capacity search)."""
    offsets = np.asarray(offsets, dtype=np.float64)
    kbps = np.asarray(kbps, dtype=np.float64)
    n = offsets.shape[0]
    ends = np.empty(n)
    ends[:-1] = offsets[1:]
    ends[-1] = duration
    caps = kbps * (ends - offsets)
    total_cap = float(caps.sum())

    t = start % duration
    i = int(np.searchsorted(offsets, t, side="right")) - 1

    first_cap = kbps[i] * (ends[i] - t)
    if kbits <= first_cap:
        return kbits / float(kbps[i])
    elapsed = float(ends[i] - t)
    remaining = kbits - first_cap

    # Capacities of the intervals that follow, wrapped once around the trace.
    rolled_caps = np.concatenate([caps[i + 1 :], caps[: i + 1]])
    rolled_spans = np.concatenate([ends[i + 1 :] - offsets[i + 1 :], ends[: i + 1] - offsets[: i + 1]])
    if remaining >= total_cap:
        cycles = math.floor(remaining / total_cap)
        elapsed += cycles * duration
        remaining -= cycles * total_cap
    cum = np.cumsum(rolled_caps)
    j = int(np.searchsorted(cum, remaining, side="left"))
    if j == n:  # remaining landed exactly on a cycle boundary
        return elapsed + duration
    before = float(cum[j - 1]) if j > 0 else 0.0
    elapsed += float(rolled_spans[:j].sum())
    rate = rolled_caps[j] / rolled_spans[j]
    return elapsed + (remaining - before) / float(rate)


def _select_backend():
    flag = os.environ.get("MSDASH_NUMBA", "auto").strip().lower()
    if flag in ("0", "false", "off"):
        return "numpy", transfer_time_numpy, None
    try:
        from numba import njit
    except ImportError:
        if flag in ("1", "true", "on"):
            raise
        return "numpy", transfer_time_numpy, None
    jitted = njit(cache=True)(_transfer_time_loop)
    return "numba", jitted, jitted


BACKEND, transfer_time, transfer_time_numba = _select_backend()
