"""Event-driven simulator for multi-source DASH streaming.

Chunks of one video are fetched over several independently varying network
paths; the simulator plays them back in order, accounts quality/switch/
rebuffering QoE, and exposes the whole loop as a maskable RL environment.
"""

from .media import (
    QualityLadder,
    RewardConfig,
    VideoManifest,
    single_source_rebuffer,
    single_source_reward,
    step_reward,
)
from .traces import BandwidthTrace, TraceSet, download_duration, load_traces
from .engine import EpisodeLog, InvalidActionError, RttSpec, SimEngine, StepOutcome
from .policies import ActionSpace, compute_mask, greedy_next_index, make_policy
from .env import EnvConfig, StreamingEnv

__version__ = "0.1.0"

__all__ = [
    "ActionSpace",
    "BandwidthTrace",
    "EnvConfig",
    "EpisodeLog",
    "InvalidActionError",
    "QualityLadder",
    "RewardConfig",
    "RttSpec",
    "SimEngine",
    "StepOutcome",
    "StreamingEnv",
    "TraceSet",
    "VideoManifest",
    "compute_mask",
    "download_duration",
    "greedy_next_index",
    "load_traces",
    "make_policy",
    "single_source_rebuffer",
    "single_source_reward",
    "step_reward",
    "__version__",
]
