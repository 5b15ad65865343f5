import numpy as np
import pytest

from msdash.media import QualityLadder, VideoManifest
from msdash.traces import BandwidthTrace

LADDER_KBPS = (300.0, 700.0, 1200.0, 1500.0, 3000.0, 6000.0, 8000.0)


@pytest.fixture(scope="session")
def ladder():
    return QualityLadder(LADDER_KBPS)


@pytest.fixture(scope="session")
def manifest():
    return VideoManifest.nominal(LADDER_KBPS, 4.0, 60)


@pytest.fixture
def make_trace():
    def _make(pairs, granularity=10.0, trace_id="t"):
        offsets, kbps = zip(*pairs)
        return BandwidthTrace(
            id=trace_id,
            offsets_s=np.array(offsets, dtype=float),
            kbps=np.array(kbps, dtype=float),
            granularity_s=granularity,
        )

    return _make
