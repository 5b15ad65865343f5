import subprocess
import sys

import numpy as np
import pytest

from msdash import _kernels


def _random_trace(rng, n):
    granularity = float(rng.choice([1.0, 5.0, 10.0]))
    offsets = np.arange(n, dtype=float) * granularity
    kbps = rng.uniform(50.0, 9000.0, size=n)
    return offsets, kbps, offsets[-1] + granularity


def _riemann_invert(offsets, kbps, duration, start, kbits):
    """Independent oracle: step through fine time slices until kbits drain."""
    dt = 1e-3
    t = start
    acc = 0.0
    elapsed = 0.0
    while True:
        tm = t % duration
        idx = int(np.searchsorted(offsets, tm, side="right")) - 1
        rate = kbps[idx]
        if acc + rate * dt >= kbits:
            return elapsed + (kbits - acc) / rate
        acc += rate * dt
        t += dt
        elapsed += dt


class TestTransferBackends:
    def test_backends_agree(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            offsets, kbps, duration = _random_trace(rng, int(rng.integers(1, 40)))
            start = float(rng.uniform(0, 3 * duration))
            kbits = float(rng.uniform(1.0, 5e5))
            a = _kernels._transfer_time_loop(offsets, kbps, duration, start, kbits)
            b = _kernels.transfer_time_numpy(offsets, kbps, duration, start, kbits)
            assert b == pytest.approx(a, rel=1e-9, abs=1e-9)
            if _kernels.transfer_time_numba is not None:
                c = _kernels.transfer_time_numba(offsets, kbps, duration, start, kbits)
                assert c == pytest.approx(a, rel=1e-9, abs=1e-9)

    def test_against_fine_riemann_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            offsets, kbps, duration = _random_trace(rng, int(rng.integers(2, 8)))
            start = float(rng.uniform(0, duration))
            kbits = float(rng.uniform(100.0, 2e4))
            got = _kernels.transfer_time(offsets, kbps, duration, start, kbits)
            want = _riemann_invert(offsets, kbps, duration, start, kbits)
            assert got == pytest.approx(want, abs=2e-3)

    def test_many_cycle_transfer(self):
        # Tiny bandwidth forces whole-trace circulation many times over.
        offsets = np.array([0.0, 10.0])
        kbps = np.array([10.0, 30.0])
        duration = 20.0
        kbits = 10.0 * 10 + 30.0 * 10  # one full cycle
        for mult in (3, 100):
            t = _kernels.transfer_time(offsets, kbps, duration, 0.0, kbits * mult)
            assert t == pytest.approx(duration * mult, rel=1e-12)
        # 7.5 cycles of bits: 7 cycles (140 s) + 100 kbits at 10 (10 s) + 100 at 30
        t = _kernels.transfer_time(offsets, kbps, duration, 0.0, kbits * 7.5)
        assert t == pytest.approx(140.0 + 10.0 + 100.0 / 30.0, rel=1e-12)

    def test_env_flag_selects_numpy_backend(self):
        out = subprocess.run(
            [sys.executable, "-c", "from msdash import _kernels; print(_kernels.BACKEND)"],
            capture_output=True, text=True, env={"MSDASH_NUMBA": "0", "PATH": "/usr/bin:/bin"},
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == "numpy"
