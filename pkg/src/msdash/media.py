"""Video model: quality ladder, chunk manifests, and QoE reward arithmetic."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

BYTES_PER_KBIT_SECOND = 125.0  # 1 Kbps sustained for 1 s = 125 bytes


class ManifestError(ValueError):
    """Structurally invalid manifest, ladder, or reward configuration."""


@dataclass(frozen=True)
class QualityLadder:
    """Ordered encoding bitrates with cached log-utilities.

    utilities[i] = ln(levels[i] / levels[0]); the lowest level has utility 0.
    Utilities are computed once here because reward arithmetic sits in the
    simulator's hot loop.
    """

    levels_kbps: tuple[float, ...]
    utilities: tuple[float, ...] = field(init=False)

    def __post_init__(self) -> None:
        levels = tuple(float(x) for x in self.levels_kbps)
        if len(levels) < 2:
            raise ManifestError(f"need at least 2 quality levels, got {len(levels)}")
        if levels[0] <= 0 or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ManifestError(f"bitrates must be positive and strictly increasing: {levels}")
        object.__setattr__(self, "levels_kbps", levels)
        object.__setattr__(
            self, "utilities", tuple(math.log(b / levels[0]) for b in levels)
        )

    @property
    def num_levels(self) -> int:
        return len(self.levels_kbps)

    def utility_of(self, level_index: int) -> float:
        if not 0 <= level_index < self.num_levels:
            raise IndexError(f"level index {level_index} outside [0, {self.num_levels})")
        return self.utilities[level_index]


# Bitrates from the default seven-level ladder (Kbps).
DEFAULT_LADDER = QualityLadder((300.0, 700.0, 1200.0, 1500.0, 3000.0, 6000.0, 8000.0))


@dataclass(frozen=True)
class VideoManifest:
    """Per-chunk byte sizes across the quality ladder.

    chunk_sizes_bytes is an (num_chunks x num_levels) array; row i holds the
    encoded size of chunk i+1 at each level (chunks are numbered from 1).
    """

    chunk_length_s: float
    chunk_sizes_bytes: np.ndarray
    ladder: QualityLadder

    def __post_init__(self) -> None:
        sizes = np.asarray(self.chunk_sizes_bytes, dtype=np.float64)
        if self.chunk_length_s <= 0:
            raise ManifestError(f"chunk_length_s must be > 0, got {self.chunk_length_s}")
        if sizes.ndim != 2 or sizes.shape[0] < 1:
            raise ManifestError(f"chunk size table must be 2-D and non-empty, got shape {sizes.shape}")
        if sizes.shape[1] != self.ladder.num_levels:
            raise ManifestError(
                f"size table has {sizes.shape[1]} columns but the ladder has "
                f"{self.ladder.num_levels} levels"
            )
        if not (sizes > 0).all():
            raise ManifestError("all chunk sizes must be > 0")
        if (np.diff(sizes, axis=1) < 0).any():
            raise ManifestError("chunk sizes must be non-decreasing in quality level")
        sizes.setflags(write=False)
        object.__setattr__(self, "chunk_sizes_bytes", sizes)

    @property
    def num_chunks(self) -> int:
        return self.chunk_sizes_bytes.shape[0]

    @property
    def max_chunk_bytes(self) -> float:
        return float(self.chunk_sizes_bytes.max())

    def chunk_bytes(self, index: int, level: int) -> float:
        """Size of chunk `index` (1-based) at `level` (0-based)."""
        return float(self.chunk_sizes_bytes[index - 1, level])

    @classmethod
    def nominal(
        cls,
        bitrates_kbps: Sequence[float],
        chunk_length_s: float,
        num_chunks: int,
    ) -> "VideoManifest":
        """Synthetic manifest where every chunk is exactly at nominal bitrate."""
        ladder = QualityLadder(tuple(bitrates_kbps))
        row = np.array(ladder.levels_kbps) * chunk_length_s * BYTES_PER_KBIT_SECOND
        sizes = np.tile(row, (num_chunks, 1))
        return cls(chunk_length_s=chunk_length_s, chunk_sizes_bytes=sizes, ladder=ladder)

    @classmethod
    def from_file(cls, path: str | Path) -> "VideoManifest":
        """Load a manifest from YAML/JSON.

        Required keys: chunk_length_s, bitrates_kbps, and either an explicit
        chunk_sizes_bytes table (num_chunks x num_levels) or
        chunk_sizes_bytes: "nominal" together with num_chunks.
        """
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ManifestError(f"{path}: manifest must be a mapping")
        try:
            chunk_len = float(raw["chunk_length_s"])
            bitrates = list(raw["bitrates_kbps"])
            sizes = raw["chunk_sizes_bytes"]
        except KeyError as exc:
            raise ManifestError(f"{path}: missing manifest key {exc}") from None
        if isinstance(sizes, str):
            if sizes != "nominal":
                raise ManifestError(f"{path}: unknown chunk_sizes_bytes spec {sizes!r}")
            if "num_chunks" not in raw:
                raise ManifestError(f"{path}: nominal manifests need num_chunks")
            return cls.nominal(bitrates, chunk_len, int(raw["num_chunks"]))
        return cls(
            chunk_length_s=chunk_len,
            chunk_sizes_bytes=np.asarray(sizes, dtype=np.float64),
            ladder=QualityLadder(tuple(bitrates)),
        )


@dataclass(frozen=True)
class RewardConfig:
    """Coefficients of the QoE reward.

    beta scales quality-switch magnitude, gamma scales rebuffering seconds.
    delta/buffer_low_s enable an optional quadratic low-buffer penalty used
    only by the single-source reward; both default off.
    """

    beta: float = 1.0
    gamma: float = 3.3
    delta: float = 0.0
    buffer_low_s: float = 0.0

    def __post_init__(self) -> None:
        for name in ("beta", "gamma", "delta", "buffer_low_s"):
            if getattr(self, name) < 0:
                raise ManifestError(f"{name} must be >= 0")


def step_reward(
    played: Sequence[tuple[float, float]],
    rebuffer_s: float,
    cfg: RewardConfig,
) -> float:
    """Reward for one scheduling step of the multi-source environment.

    `played` holds (utility, previous_chunk_utility) for every chunk whose
    playback began inside the step; the first chunk of the video carries its
    own utility as previous (no switch penalty).
    """
    total = 0.0
    for utility, prev_utility in played:
        total += utility - cfg.beta * abs(utility - prev_utility)
    return total - cfg.gamma * rebuffer_s


def single_source_reward(
    utility: float,
    prev_utility: float,
    rebuffer_s: float,
    buffer_after_s: float,
    cfg: RewardConfig,
) -> float:
    """Per-chunk reward of the classical single-source formulation.

    Used as the oracle for the one-path degenerate mode of the simulator.
    """
    low = max(0.0, cfg.buffer_low_s - buffer_after_s)
    return (
        utility
        - cfg.beta * abs(utility - prev_utility)
        - cfg.gamma * rebuffer_s
        - cfg.delta * low * low
    )


def single_source_rebuffer(download_time_s: float, buffer_level_s: float) -> float:
    """Stall caused by one chunk download when chunks arrive in order."""
    return max(0.0, download_time_s - buffer_level_s)
