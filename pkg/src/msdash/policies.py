"""Action spaces, validity masks, greedy scheduling, and baseline policies.

Two action spaces are supported:

* ``level``: the policy picks only a quality level; the chunk index comes
  from greedy scheduling (smallest never-requested index in the window).
* ``joint``: the policy picks (index offset, level) jointly.  Flat actions
  are row-major by offset: ``a = (offset - 1) * L + level``; equivalently
  ``offset = a // L + 1`` and ``level = a % L``.  This encoding is part of
  the bridge wire contract and must not change.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .media import QualityLadder

KIND_LEVEL = "level"
KIND_JOINT = "joint"


class PolicyError(ValueError):
    """Unknown policy name or a policy breaking its contract."""


@dataclass(frozen=True)
class ActionSpace:
    kind: str
    window: int
    num_levels: int

    def __post_init__(self) -> None:
        if self.kind not in (KIND_LEVEL, KIND_JOINT):
            raise PolicyError(f"unknown action space kind {self.kind!r}")
        if self.window < 1 or self.num_levels < 1:
            raise PolicyError("window and num_levels must be >= 1")

    @property
    def size(self) -> int:
        if self.kind == KIND_LEVEL:
            return self.num_levels
        return self.window * self.num_levels

    def decode(self, action: int) -> tuple[Optional[int], int]:
        """Flat action -> (index_offset or None for greedy, level)."""
        if not 0 <= action < self.size:
            raise PolicyError(f"action {action} outside [0, {self.size})")
        if self.kind == KIND_LEVEL:
            return None, int(action)
        return int(action) // self.num_levels + 1, int(action) % self.num_levels

    def encode(self, index_offset: int, level: int) -> int:
        if self.kind == KIND_LEVEL:
            return int(level)
        if not 1 <= index_offset <= self.window:
            raise PolicyError(f"offset {index_offset} outside [1, {self.window}]")
        return (int(index_offset) - 1) * self.num_levels + int(level)


def valid_offsets(
    playing_index: int, requested: np.ndarray, num_chunks: int, window: int
) -> list[int]:
    """Offsets o such that chunk playing_index+o is in-window and never requested."""
    hi = min(window, num_chunks - playing_index)
    return [
        o for o in range(1, hi + 1) if not requested[playing_index + o]
    ]


def compute_mask(
    space: ActionSpace,
    playing_index: int,
    requested: np.ndarray,
    num_chunks: int,
) -> np.ndarray:
    """Validity bitmap over the flat action space.

    Joint space: action (o, l) is valid iff o <= min(window, N - playing)
    and chunk playing+o has never been requested.  Level space: all levels
    are valid whenever any request is permitted at all.
    """
    mask = np.zeros(space.size, dtype=bool)
    offsets = valid_offsets(playing_index, requested, num_chunks, space.window)
    if space.kind == KIND_LEVEL:
        if offsets:
            mask[:] = True
        return mask
    for o in offsets:
        base = (o - 1) * space.num_levels
        mask[base : base + space.num_levels] = True
    return mask


def greedy_next_index(
    playing_index: int, requested: np.ndarray, num_chunks: int, window: int
) -> int:
    """Smallest in-window chunk index that was never requested."""
    hi = min(playing_index + window, num_chunks)
    for index in range(playing_index + 1, hi + 1):
        if not requested[index]:
            return index
    raise PolicyError("no unrequested chunk in the window (engine should have deferred)")


def harmonic_mean(values: Sequence[float]) -> float:
    if not values:
        raise ValueError("harmonic mean of an empty sequence")
    return len(values) / sum(1.0 / v for v in values)


def throughput_rule(history_kbps: Sequence[float], ladder: QualityLadder) -> int:
    """Highest level with bitrate strictly below the harmonic-mean estimate.

    Uses however many (up to 6) samples exist; an empty history picks the
    lowest level (conservative cold start).
    """
    if not history_kbps:
        return 0
    estimate = harmonic_mean(history_kbps)
    level = 0
    for i, bitrate in enumerate(ladder.levels_kbps):
        if bitrate < estimate:
            level = i
    return level


@dataclass(frozen=True)
class BolaParams:
    """Control weights of the buffer-based rule.

    The score of level m at buffer level Q seconds is
        (v * (utility_m + gp * chunk_length) - Q) / chunk_bits_m
    with nominal per-level chunk bits.  `derive` picks gp so the lowest
    level wins at Q = 0 (gp is 1.1x the tightest such bound over all
    levels; v cancels out of that comparison) and then v just under the
    largest value for which the top level strictly wins at Q = buffer_max.
    Larger buffers only widen the top level's lead because scores fall at
    rate 1/bits, fastest for the smallest chunks.
    """

    v: float
    gp: float

    @classmethod
    def derive(
        cls, ladder: QualityLadder, chunk_length_s: float, buffer_max_s: float
    ) -> "BolaParams":
        utils = ladder.utilities
        rates = ladder.levels_kbps
        bits = [r * chunk_length_s for r in rates]
        gp = 1.1 * max(
            utils[m] / (chunk_length_s * (rates[m] / rates[0] - 1.0))
            for m in range(1, len(rates))
        )
        g = gp * chunk_length_s
        top = len(rates) - 1
        v = math.inf
        for m in range(top):
            coef = (utils[top] + g) * bits[m] - (utils[m] + g) * bits[top]
            if coef >= 0:  # top dominates m at every buffer level
                continue
            v = min(v, buffer_max_s * (bits[m] - bits[top]) / coef)
        if not math.isfinite(v):
            v = buffer_max_s  # degenerate ladder; any positive weight works
        return cls(v=0.99 * v, gp=gp)


def bola_rule(
    buffer_seconds: float,
    ladder: QualityLadder,
    chunk_length_s: float,
    params: BolaParams,
) -> int:
    """Argmax of the buffer-based score; ties break toward the lower level."""
    if buffer_seconds < 0:
        raise ValueError(f"buffer_seconds must be >= 0, got {buffer_seconds}")
    best_level = 0
    best_score = -math.inf
    for m, rate in enumerate(ladder.levels_kbps):
        bits = rate * chunk_length_s
        score = (
            params.v * (ladder.utilities[m] + params.gp * chunk_length_s) - buffer_seconds
        ) / bits
        if score > best_score:
            best_level, best_score = m, score
    return best_level


# ----------------------------- policies -----------------------------

class Policy:
    """Maps (observation, mask, info) at a decision point to a flat action."""

    name = "base"

    def __init__(self, space: ActionSpace):
        self.space = space

    def decide(self, observation: np.ndarray, mask: np.ndarray, info: dict) -> int:
        raise NotImplementedError

    def _greedy_offset(self, info: dict) -> int:
        index = greedy_next_index(
            info["playing_index"], info["requested"], info["num_chunks"], info["window"]
        )
        return index - info["playing_index"]

    def _encode(self, info: dict, level: int) -> int:
        if self.space.kind == KIND_LEVEL:
            return level
        return self.space.encode(self._greedy_offset(info), level)


class RandomValidPolicy(Policy):
    """Uniform over the currently valid actions (seeded)."""

    name = "random"

    def __init__(self, space: ActionSpace, seed: int = 0):
        super().__init__(space)
        self._rng = np.random.default_rng(seed)

    def decide(self, observation, mask, info) -> int:
        valid = np.flatnonzero(mask)
        if valid.size == 0:
            raise PolicyError("mask has no valid action")
        return int(valid[self._rng.integers(valid.size)])


class FixedLevelPolicy(Policy):
    """Always the same quality level, greedy chunk order."""

    name = "fixed"

    def __init__(self, space: ActionSpace, level: int):
        super().__init__(space)
        if not 0 <= level < space.num_levels:
            raise PolicyError(f"fixed level {level} outside [0, {space.num_levels})")
        self.level = level

    def decide(self, observation, mask, info) -> int:
        return self._encode(info, self.level)


class ThroughputPolicy(Policy):
    """Harmonic-mean rate estimate on the deciding path, greedy chunk order."""

    name = "throughput"

    def __init__(self, space: ActionSpace, ladder: QualityLadder):
        super().__init__(space)
        self.ladder = ladder

    def decide(self, observation, mask, info) -> int:
        history = info["throughput_history"][info["path_id"]]
        return self._encode(info, throughput_rule(history, self.ladder))


class BolaPolicy(Policy):
    """Buffer-level score maximisation, greedy chunk order."""

    name = "bola"

    def __init__(
        self,
        space: ActionSpace,
        ladder: QualityLadder,
        chunk_length_s: float,
        buffer_max_s: float,
        params: BolaParams | None = None,
    ):
        super().__init__(space)
        self.ladder = ladder
        self.chunk_length_s = chunk_length_s
        self.params = params or BolaParams.derive(ladder, chunk_length_s, buffer_max_s)

    def decide(self, observation, mask, info) -> int:
        level = bola_rule(info["buffer_seconds"], self.ladder, self.chunk_length_s, self.params)
        return self._encode(info, level)


class ScriptedPolicy(Policy):
    """Replays a fixed flat-action list (golden tests, bridge checks)."""

    name = "scripted"

    def __init__(self, space: ActionSpace, actions: Sequence[int]):
        super().__init__(space)
        self.actions = [int(a) for a in actions]
        self._pos = 0

    def decide(self, observation, mask, info) -> int:
        if self._pos >= len(self.actions):
            raise PolicyError("scripted action list exhausted")
        action = self.actions[self._pos]
        self._pos += 1
        return action


def make_policy(
    spec: str,
    space: ActionSpace,
    *,
    ladder: QualityLadder,
    chunk_length_s: float,
    buffer_max_s: float,
    seed: int = 0,
) -> Policy:
    """Build a policy from its name string.

    Names: ``throughput``, ``bola``, ``random``, ``fixed:<level>``,
    ``scripted:<file>`` (JSON list of flat actions).  ``external`` decisions
    come over the bridge and never reach a local policy.
    """
    if spec == "throughput":
        return ThroughputPolicy(space, ladder)
    if spec == "bola":
        return BolaPolicy(space, ladder, chunk_length_s, buffer_max_s)
    if spec == "random":
        return RandomValidPolicy(space, seed=seed)
    if spec.startswith("fixed:"):
        return FixedLevelPolicy(space, int(spec.split(":", 1)[1]))
    if spec.startswith("scripted:"):
        actions = json.loads(Path(spec.split(":", 1)[1]).read_text(encoding="utf-8"))
        return ScriptedPolicy(space, actions)
    if spec == "external":
        raise PolicyError("'external' policies are driven over the bridge, not locally")
    raise PolicyError(f"unknown policy {spec!r}")
