"""Event-driven core for multi-path chunk streaming.

An episode is driven by four event kinds:

  DOWN      the in-flight chunk on a path finished downloading; the path is
            ready for its next request (or a pause / deferral)
  PAUSE     a path re-checks whether it may issue a request (buffer at cap,
            or the whole request window already requested)
  PLAY      the playing chunk reached its end boundary
  REBUFFER  playback is stalled; poll whether the next chunk arrived

PAUSE and REBUFFER re-check on a fixed SAMPLE grid (0.05 s).  Events at
equal timestamps are ordered PLAY, REBUFFER, DOWN(path 0), DOWN(path 1), ...,
PAUSE, then FIFO.  The loop is deterministic: identical (seed, traces,
action sequence) reproduce the episode byte for byte.

Buffer occupancy counts chunks from full receipt until their playback
*completes*; the playing chunk still occupies its slot.  With the default
parameters (cap 30 s, window 7, 4 s chunks) this is what makes the pause
machinery reachable at all: at most window+1 chunks are ever resident.

Poll chains are condensed: while a chain's wake condition cannot change
before the earliest scheduled download completion / play boundary, the
intermediate no-op polls are skipped arithmetically.  Timestamps, rebuffer
accounting, and logs are identical to popping every poll.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Optional

import numpy as np

from .media import RewardConfig, VideoManifest, step_reward
from .traces import BandwidthTrace, download_duration

SAMPLE_S = 0.05
HISTORY_LEN = 6
DOWNLOAD_TIME_SCALE_S = 10.0

EV_PLAY = 0
EV_REBUFFER = 1
EV_DOWN = 2
EV_PAUSE = 3


class EngineError(RuntimeError):
    """Engine used outside its contract (bad call order, invalid state)."""


class InvalidActionError(ValueError):
    """An action the current mask forbids; the engine never remaps it."""


@dataclass(frozen=True)
class RttSpec:
    """Round-trip time drawn per request: 'uniform' in [low, high] or 'constant'."""

    kind: str = "uniform"
    low_s: float = 0.05
    high_s: float = 0.10

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "constant"):
            raise ValueError(f"unknown rtt kind {self.kind!r}")
        if self.low_s < 0 or self.high_s < self.low_s:
            raise ValueError(f"bad rtt range [{self.low_s}, {self.high_s}]")

    @classmethod
    def constant(cls, value_s: float) -> "RttSpec":
        return cls(kind="constant", low_s=value_s, high_s=value_s)

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "constant":
            return self.low_s
        return float(rng.uniform(self.low_s, self.high_s))


@dataclass
class Decision:
    """A path is idle and allowed to request; the caller must apply_action."""

    path_id: int
    time: float


@dataclass
class StepOutcome:
    """Reward window between two consecutive requests (on any path)."""

    reward: float
    played_chunks: list[tuple[int, int]]
    rebuffer_s: float
    done: bool


@dataclass
class ChunkRecord:
    index: int
    level: int
    path: int
    request_time: float
    finish_time: float
    buffer_at_request_s: float
    play_time: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "type": "chunk",
            "index": self.index,
            "level": self.level,
            "path": self.path,
            "request_time": self.request_time,
            "finish_time": self.finish_time,
            "buffer_at_request_s": self.buffer_at_request_s,
            "play_time": self.play_time,
        }


@dataclass
class EpisodeLog:
    """Per-chunk records plus the episode QoE decomposition."""

    seed: int
    trace_ids: list[str]
    chunks: list[ChunkRecord]
    step_rewards: list[float]
    reward: float
    utility: float
    switch_penalty: float
    rebuffer_penalty: float
    rebuffer_s: float
    startup_delay_s: float
    max_buffer_s: float
    buffer_series: list[tuple[float, float]] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "type": "episode",
            "seed": self.seed,
            "trace_ids": self.trace_ids,
            "reward": self.reward,
            "utility": self.utility,
            "switch_penalty": self.switch_penalty,
            "rebuffer_penalty": self.rebuffer_penalty,
            "rebuffer_s": self.rebuffer_s,
            "startup_delay_s": self.startup_delay_s,
            "max_buffer_s": self.max_buffer_s,
            "num_steps": len(self.step_rewards),
        }

    def lines(self) -> list[dict]:
        return [c.as_dict() for c in self.chunks] + [self.summary()]


@dataclass
class _InFlight:
    index: int
    level: int
    request_time: float
    finish_time: float
    num_bytes: float


class SimEngine:
    """One streaming episode: multi-path downloads feeding ordered playback."""

    def __init__(
        self,
        manifest: VideoManifest,
        traces: list[BandwidthTrace],
        *,
        reward: RewardConfig | None = None,
        buffer_max_s: float = 30.0,
        window: int | None = None,
        rtt: RttSpec | None = None,
        num_chunks: int | None = None,
        seed: int = 0,
        episode_offsets_s: list[float] | None = None,
        condense_polls: bool = True,
    ):
        if not traces:
            raise EngineError("need at least one path (one trace)")
        self.manifest = manifest
        self.ladder = manifest.ladder
        self.traces = list(traces)
        self.num_paths = len(self.traces)
        self.reward_cfg = reward or RewardConfig()
        self.buffer_max_s = float(buffer_max_s)
        self.chunk_len = manifest.chunk_length_s
        self.window = window if window is not None else int(self.buffer_max_s // self.chunk_len)
        if self.window < 1:
            raise EngineError(f"window must be >= 1, got {self.window}")
        # While the head chunk is missing the buffer can hold at most
        # window-1 chunks; the cap must stay above that or a pause could
        # outlive every pending event.
        if (self.window - 1) * self.chunk_len >= self.buffer_max_s:
            raise EngineError(
                f"(window-1)*chunk_length = {(self.window - 1) * self.chunk_len} s "
                f"must stay below buffer_max_s = {self.buffer_max_s} s"
            )
        self.num_chunks = num_chunks if num_chunks is not None else manifest.num_chunks
        if not 1 <= self.num_chunks <= manifest.num_chunks:
            raise EngineError(
                f"num_chunks {self.num_chunks} outside [1, {manifest.num_chunks}]"
            )
        self.rtt = rtt or RttSpec()
        self.seed = seed
        # False pops every 0.05 s poll literally; only useful to cross-check
        # that condensation leaves episodes bit-identical.
        self.condense_polls = condense_polls
        self.episode_offsets = (
            [float(x) for x in episode_offsets_s]
            if episode_offsets_s is not None
            else [0.0] * self.num_paths
        )
        if len(self.episode_offsets) != self.num_paths:
            raise EngineError("episode_offsets_s must have one entry per path")
        self.reset()

    # ------------------------------------------------------------- state

    def reset(self) -> None:
        n = self.num_chunks
        self.now = 0.0
        self._heap: list[tuple[float, int, int, int, int]] = []
        self._seq = 0
        self._rng = np.random.default_rng(self.seed)
        self.requested = np.zeros(n + 2, dtype=bool)
        self.requested_count = 0
        self.received = np.zeros(n + 2, dtype=bool)
        self.in_buffer = np.zeros(n + 2, dtype=bool)
        self.level_of = np.full(n + 2, -1, dtype=np.int64)
        self.buffer_chunks = 0
        self.in_flight: list[Optional[_InFlight]] = [None] * self.num_paths
        self.history_tput: list[deque[float]] = [deque(maxlen=HISTORY_LEN) for _ in range(self.num_paths)]
        self.history_dt: list[deque[float]] = [deque(maxlen=HISTORY_LEN) for _ in range(self.num_paths)]
        self.playing_index = 0
        self.playback_started = False
        self.play_boundary: Optional[float] = None
        self._rebuffer_poll: Optional[float] = None
        self.stalled = False
        self.done = False
        self.startup_delay_s = 0.0
        self.max_buffer_s = 0.0
        self._acc_played: list[tuple[float, float]] = []
        self._acc_chunks: list[tuple[int, int]] = []
        self._acc_rebuf = 0.0
        self.total_utility = 0.0
        self.total_switch = 0.0
        self.total_rebuffer = 0.0
        self.step_rewards: list[float] = []
        self.chunk_records: dict[int, ChunkRecord] = {}
        self.buffer_series: list[tuple[float, float]] = [(0.0, 0.0)]
        self._pending: deque[int] = deque(range(self.num_paths))
        self._awaiting: Optional[int] = None

    @property
    def buffer_seconds(self) -> float:
        return self.buffer_chunks * self.chunk_len

    def _window_hi(self) -> int:
        return min(self.playing_index + self.window, self.num_chunks)

    def _window_has_unrequested(self) -> bool:
        lo = self.playing_index + 1
        hi = self._window_hi()
        return lo <= hi and not self.requested[lo : hi + 1].all()

    # ------------------------------------------------------------- events

    def _schedule(self, time: float, kind: int, path: int) -> None:
        if kind == EV_PLAY:
            prio = 0
        elif kind == EV_REBUFFER:
            prio = 1
        elif kind == EV_DOWN:
            prio = 2 + path
        else:  # EV_PAUSE: one shared priority, FIFO by sequence
            prio = 2 + self.num_paths
        heappush(self._heap, (time, prio, self._seq, kind, path))
        self._seq += 1

    def _horizon(self) -> Optional[float]:
        """Earliest future event that can change buffer/availability/playback state.

        Candidates: download completions, the play boundary, and a pending
        stall poll (its resume advances the playing index, which moves the
        request window pause chains wait on).
        """
        times = [f.finish_time for f in self.in_flight if f is not None]
        if self.play_boundary is not None:
            times.append(self.play_boundary)
        if self._rebuffer_poll is not None:
            times.append(self._rebuffer_poll)
        return min(times) if times else None

    def _schedule_poll(self, kind: int, path: int) -> None:
        """Queue the next poll of a PAUSE/REBUFFER chain, skipping no-op polls.

        Every poll strictly before the horizon is guaranteed to fail, so the
        chain jumps to the first grid point at or past it.  Skipped REBUFFER
        polls still accrue their 0.05 s stall slices (they all precede any
        possible step boundary, so attribution is unchanged).  Without a
        horizon the chain falls back to plain per-sample polling; some other
        queued chain then owns the next state change.
        """
        ticks = 1
        horizon = self._horizon()
        if horizon is None:
            if not self._heap:
                raise EngineError("poll chain is the only pending event; episode cannot progress")
        elif self.condense_polls:
            gap = horizon - self.now
            if gap > SAMPLE_S:
                ticks = max(1, math.ceil(gap / SAMPLE_S))
            if kind == EV_REBUFFER and ticks > 1:
                self._accrue_rebuffer((ticks - 1) * SAMPLE_S)
        poll_time = self.now + ticks * SAMPLE_S
        if kind == EV_REBUFFER:
            self._rebuffer_poll = poll_time
        self._schedule(poll_time, kind, path)

    def _accrue_rebuffer(self, seconds: float) -> None:
        self._acc_rebuf += seconds
        self.total_rebuffer += seconds

    def _note_buffer(self) -> None:
        self.max_buffer_s = max(self.max_buffer_s, self.buffer_seconds)
        self.buffer_series.append((self.now, self.buffer_seconds))

    def _begin_play(self, index: int) -> None:
        level = int(self.level_of[index])
        u = self.ladder.utilities[level]
        prev_u = self.ladder.utilities[int(self.level_of[index - 1])] if index > 1 else u
        self._acc_played.append((u, prev_u))
        self._acc_chunks.append((index, level))
        self.total_utility += u
        self.total_switch += abs(u - prev_u)
        self.playing_index = index
        self.stalled = False
        self._rebuffer_poll = None
        self.chunk_records[index].play_time = self.now
        self.play_boundary = self.now + self.chunk_len
        self._schedule(self.play_boundary, EV_PLAY, -1)

    def _on_down(self, path: int) -> None:
        fl = self.in_flight[path]
        if fl is None:
            raise EngineError(f"DOWN event for idle path {path}")
        self.in_flight[path] = None
        self.received[fl.index] = True
        self.in_buffer[fl.index] = True
        self.buffer_chunks += 1
        self._note_buffer()
        dt = self.now - fl.request_time
        self.history_tput[path].append(fl.num_bytes * 0.008 / dt)
        self.history_dt[path].append(dt)
        if not self.playback_started and self.in_buffer[1]:
            self.playback_started = True
            self.startup_delay_s = self.now
            self._begin_play(1)
        self._path_ready(path)

    def _on_play_boundary(self) -> None:
        index = self.playing_index
        self.in_buffer[index] = False
        self.buffer_chunks -= 1
        self.play_boundary = None
        self._note_buffer()
        if index == self.num_chunks:
            self.done = True
            return
        if self.in_buffer[index + 1]:
            self._begin_play(index + 1)
        else:
            self.stalled = True
            self._schedule_poll(EV_REBUFFER, -1)

    def _on_rebuffer(self) -> None:
        self._rebuffer_poll = None  # this poll fired; reschedule computes the next
        self._accrue_rebuffer(SAMPLE_S)
        nxt = self.playing_index + 1
        if self.in_buffer[nxt]:
            self._begin_play(nxt)
        else:
            self._schedule_poll(EV_REBUFFER, -1)

    def _path_ready(self, path: int) -> None:
        """Route an idle path: park, pause/defer on the poll grid, or decide."""
        if self.requested_count >= self.num_chunks:
            return  # every chunk requested; this path is done for the episode
        if self.buffer_seconds >= self.buffer_max_s or not self._window_has_unrequested():
            self._schedule_poll(EV_PAUSE, path)
        else:
            self._pending.append(path)

    # ------------------------------------------------------------- driving

    def advance_until_decision(self) -> Decision | StepOutcome:
        """Run events in time order until a path needs a request or the episode ends.

        Returns a Decision to be answered via apply_action, or the terminal
        StepOutcome (done=True) carrying the residual reward window.
        """
        if self.done:
            raise EngineError("episode already finished")
        if self._awaiting is not None:
            raise EngineError(f"decision for path {self._awaiting} still unanswered")
        while True:
            while self._pending:
                path = self._pending.popleft()
                # Re-check: another path's request may have consumed the window.
                if self.requested_count >= self.num_chunks:
                    continue
                if self.buffer_seconds >= self.buffer_max_s or not self._window_has_unrequested():
                    self._schedule_poll(EV_PAUSE, path)
                    continue
                self._awaiting = path
                return Decision(path_id=path, time=self.now)
            if not self._heap:
                raise EngineError("event queue ran dry before the episode ended")
            time, _prio, _seq, kind, path = heappop(self._heap)
            self.now = time
            if kind == EV_DOWN:
                self._on_down(path)
            elif kind == EV_PLAY:
                self._on_play_boundary()
                if self.done:
                    return self._flush(done=True)
            elif kind == EV_REBUFFER:
                self._on_rebuffer()
            else:
                self._path_ready(path)

    def apply_action(self, path_id: int, index_offset: int, level: int) -> StepOutcome:
        """Issue a request on `path_id`; returns the reward window that just closed.

        The outcome covers everything played/rebuffered since the previous
        request on any path.  Invalid actions raise InvalidActionError with
        the state left untouched.
        """
        if self.done:
            raise EngineError("episode already finished")
        if self._awaiting != path_id:
            raise EngineError(f"no pending decision for path {path_id}")
        hi = self._window_hi()
        index = self.playing_index + index_offset
        if not 1 <= index_offset <= hi - self.playing_index:
            raise InvalidActionError(
                f"index offset {index_offset} outside [1, {hi - self.playing_index}]"
            )
        if self.requested[index]:
            raise InvalidActionError(f"chunk {index} already requested")
        if not 0 <= level < self.ladder.num_levels:
            raise InvalidActionError(f"level {level} outside [0, {self.ladder.num_levels})")
        if self.in_flight[path_id] is not None:
            raise EngineError(f"path {path_id} already has a download in flight")

        outcome = self._flush(done=False)

        rtt = self.rtt.sample(self._rng)
        num_bytes = self.manifest.chunk_bytes(index, level)
        start_abs = self.episode_offsets[path_id] + self.now
        duration = download_duration(self.traces[path_id], start_abs, num_bytes, rtt)
        finish = self.now + duration
        self.in_flight[path_id] = _InFlight(index, level, self.now, finish, num_bytes)
        self.requested[index] = True
        self.requested_count += 1
        self.level_of[index] = level
        self.chunk_records[index] = ChunkRecord(
            index=index,
            level=level,
            path=path_id,
            request_time=self.now,
            finish_time=finish,
            buffer_at_request_s=self.buffer_seconds,
        )
        self._schedule(finish, EV_DOWN, path_id)
        self._awaiting = None
        return outcome

    def _flush(self, done: bool) -> StepOutcome:
        reward = step_reward(self._acc_played, self._acc_rebuf, self.reward_cfg)
        outcome = StepOutcome(
            reward=reward,
            played_chunks=list(self._acc_chunks),
            rebuffer_s=self._acc_rebuf,
            done=done,
        )
        self.step_rewards.append(reward)
        self._acc_played.clear()
        self._acc_chunks.clear()
        self._acc_rebuf = 0.0
        return outcome

    def pending_outcome(self) -> StepOutcome:
        """Preview of the reward window accrued since the last request."""
        return StepOutcome(
            reward=step_reward(self._acc_played, self._acc_rebuf, self.reward_cfg),
            played_chunks=list(self._acc_chunks),
            rebuffer_s=self._acc_rebuf,
            done=self.done,
        )

    # ------------------------------------------------------------- outputs

    @property
    def observation_size(self) -> int:
        p, w, l = self.num_paths, self.window, self.ladder.num_levels
        return p * HISTORY_LEN + w * l + w + 3 + p * HISTORY_LEN

    def observe(self, path_id: int) -> np.ndarray:
        """Observation vector at a decision point (layout documented in PROTOCOL.md).

        Order: per-path last-6 goodputs, sizes of the L levels for the next W
        chunks, levels of the next W chunks (0 = not downloaded), buffer
        seconds, remaining unplayed chunks, playing chunk's level, per-path
        last-6 download times.  All entries are scaled to roughly [0, 1]; raw
        values are available via observation_info().  The vector does not
        depend on `path_id` (both paths' histories are always present).
        """
        del path_id
        w, l, n = self.window, self.ladder.num_levels, self.num_chunks
        tput_scale = self.ladder.levels_kbps[-1]
        size_scale = self.manifest.max_chunk_bytes
        vec = np.zeros(self.observation_size, dtype=np.float64)
        pos = 0
        for path in range(self.num_paths):
            hist = self.history_tput[path]
            vec[pos + HISTORY_LEN - len(hist) : pos + HISTORY_LEN] = [
                x / tput_scale for x in hist
            ]
            pos += HISTORY_LEN
        for j in range(w):
            index = self.playing_index + 1 + j
            if index <= n:
                vec[pos : pos + l] = self.manifest.chunk_sizes_bytes[index - 1] / size_scale
            pos += l
        for j in range(w):
            index = self.playing_index + 1 + j
            if index <= n and self.received[index]:
                vec[pos] = (self.level_of[index] + 1) / l
            pos += 1
        vec[pos] = self.buffer_seconds / self.buffer_max_s
        vec[pos + 1] = (n - self.playing_index) / n
        if self.playing_index > 0:
            vec[pos + 2] = (self.level_of[self.playing_index] + 1) / l
        pos += 3
        for path in range(self.num_paths):
            hist = self.history_dt[path]
            vec[pos + HISTORY_LEN - len(hist) : pos + HISTORY_LEN] = [
                x / DOWNLOAD_TIME_SCALE_S for x in hist
            ]
            pos += HISTORY_LEN
        return vec

    def observation_info(self) -> dict:
        """Raw (unscaled) engine state for policies and logs."""
        return {
            "time": self.now,
            "playing_index": self.playing_index,
            "buffer_seconds": self.buffer_seconds,
            "requested": self.requested[: self.num_chunks + 1].copy(),
            "num_chunks": self.num_chunks,
            "window": self.window,
            "throughput_history": [list(h) for h in self.history_tput],
            "download_time_history": [list(h) for h in self.history_dt],
            "playing_level": int(self.level_of[self.playing_index]) if self.playing_index else None,
        }

    def episode_log(self) -> EpisodeLog:
        if not self.done:
            raise EngineError("episode still running")
        chunks = [self.chunk_records[i] for i in sorted(self.chunk_records)]
        return EpisodeLog(
            seed=self.seed,
            trace_ids=[t.id for t in self.traces],
            chunks=chunks,
            step_rewards=list(self.step_rewards),
            reward=float(sum(self.step_rewards)),
            utility=self.total_utility,
            switch_penalty=self.reward_cfg.beta * self.total_switch,
            rebuffer_penalty=self.reward_cfg.gamma * self.total_rebuffer,
            rebuffer_s=self.total_rebuffer,
            startup_delay_s=self.startup_delay_s,
            max_buffer_s=self.max_buffer_s,
            buffer_series=list(self.buffer_series),
        )
