"""Episodic reset/step facade binding engine, policies, and trace pools.

The facade follows the usual RL loop:

    env = StreamingEnv(cfg)
    obs, mask = env.reset(episode_seed)
    obs, mask, reward, done, info = env.step(action)

Every output is fully determined by (config, episode seed, action sequence).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .engine import Decision, EpisodeLog, RttSpec, SimEngine
from .media import RewardConfig, VideoManifest
from .policies import KIND_JOINT, ActionSpace, compute_mask
from .traces import BandwidthTrace, TraceSet, filter_by_mean, load_traces, walk_pool

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid environment configuration (schema, empty pools, ...)."""


# Scenario presets: per-path mean-bandwidth bands in Kbps.  The first path
# always stays in [1500, 2000]; the second path's band steps down, with the
# last band doubling as the broadband-vs-weak-cellular extreme case.
SCENARIOS: dict[str, tuple[tuple[float, float], ...]] = {
    "band-1.5-2.0": ((1500.0, 2000.0), (1500.0, 2000.0)),
    "band-1.0-1.5": ((1500.0, 2000.0), (1000.0, 1500.0)),
    "band-0.5-1.0": ((1500.0, 2000.0), (500.0, 1000.0)),
    "band-lt-0.5": ((1500.0, 2000.0), (100.0, 500.0)),
    "extreme": ((1500.0, 2000.0), (100.0, 500.0)),
}


@dataclass(frozen=True)
class PathTraceConfig:
    """Where one path's traces come from and which means to keep.

    source kinds: ``dir``/``file`` (load `path` under `format`), ``walk``
    (pool of seeded bounded random walks), ``constant`` (one flat trace per
    `kbps` entry).
    """

    source: dict = field(default_factory=lambda: {"kind": "walk"})
    mean_band_kbps: Optional[tuple[float, float]] = None


@dataclass(frozen=True)
class EnvConfig:
    chunk_length_s: float = 4.0
    bitrates_kbps: tuple[float, ...] = (300.0, 700.0, 1200.0, 1500.0, 3000.0, 6000.0, 8000.0)
    num_chunks: int = 60
    manifest_path: Optional[str] = None
    buffer_max_s: float = 30.0
    window: Optional[int] = None
    beta: float = 1.0
    gamma: float = 3.3
    delta: float = 0.0
    buffer_low_s: float = 0.0
    action_space: str = KIND_JOINT
    rtt: RttSpec = field(default_factory=RttSpec)
    paths: tuple[PathTraceConfig, ...] = (PathTraceConfig(), PathTraceConfig())
    train_fraction: float = 0.8
    split_seed: int = 7
    strict: bool = True

    @property
    def window_size(self) -> int:
        if self.window is not None:
            return self.window
        return int(self.buffer_max_s // self.chunk_length_s)

    def reward_config(self) -> RewardConfig:
        return RewardConfig(
            beta=self.beta, gamma=self.gamma, delta=self.delta, buffer_low_s=self.buffer_low_s
        )

    def manifest(self) -> VideoManifest:
        if self.manifest_path:
            m = VideoManifest.from_file(self.manifest_path)
            if m.num_chunks < self.num_chunks:
                raise ConfigError(
                    f"manifest has {m.num_chunks} chunks, config wants {self.num_chunks}"
                )
            return m
        return VideoManifest.nominal(self.bitrates_kbps, self.chunk_length_s, self.num_chunks)

    def with_scenario(self, name: str) -> "EnvConfig":
        if name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {name!r}; have {sorted(SCENARIOS)}")
        bands = SCENARIOS[name]
        if len(bands) != len(self.paths):
            raise ConfigError(
                f"scenario {name!r} defines {len(bands)} paths, config has {len(self.paths)}"
            )
        new_paths = tuple(
            replace(p, mean_band_kbps=band) for p, band in zip(self.paths, bands)
        )
        return replace(self, paths=new_paths)

    @classmethod
    def from_dict(cls, raw: dict) -> "EnvConfig":
        known = dict(raw)
        kwargs = {}
        for key in (
            "chunk_length_s", "num_chunks", "manifest_path", "buffer_max_s", "window",
            "beta", "gamma", "delta", "buffer_low_s", "action_space",
            "train_fraction", "split_seed", "strict",
        ):
            if key in known:
                kwargs[key] = known.pop(key)
        if "bitrates_kbps" in known:
            kwargs["bitrates_kbps"] = tuple(known.pop("bitrates_kbps"))
        if "rtt" in known:
            r = known.pop("rtt")
            kwargs["rtt"] = RttSpec(
                kind=r.get("kind", "uniform"),
                low_s=r.get("low_s", 0.05),
                high_s=r.get("high_s", r.get("low_s", 0.10)),
            )
        if "paths" in known:
            paths = []
            for p in known.pop("paths"):
                band = p.get("mean_band_kbps")
                paths.append(
                    PathTraceConfig(
                        source=p.get("source", {"kind": "walk"}),
                        mean_band_kbps=tuple(band) if band else None,
                    )
                )
            kwargs["paths"] = tuple(paths)
        if known:
            raise ConfigError(f"unknown config keys: {sorted(known)}")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "EnvConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        return cls.from_dict(raw)


def build_pool(path_cfg: PathTraceConfig, path_index: int) -> list[BandwidthTrace]:
    """Materialise one path's trace pool from its source spec."""
    src = dict(path_cfg.source)
    kind = src.pop("kind", "walk")
    if kind in ("dir", "file"):
        traces = load_traces(src.pop("path"), src.pop("format", "canonical"), **src)
    elif kind == "walk":
        band = path_cfg.mean_band_kbps or (100.0, 2000.0)
        traces = walk_pool(
            count=int(src.pop("count", 40)),
            low_kbps=float(src.pop("low_kbps", band[0])),
            high_kbps=float(src.pop("high_kbps", band[1])),
            seed=int(src.pop("seed", 1000 + path_index)),
            duration_s=float(src.pop("duration_s", 400.0)),
            granularity_s=float(src.pop("granularity_s", 1.0)),
            prefix=f"p{path_index}walk",
        )
    elif kind == "constant":
        from .traces import constant_trace

        kbps_list = src.pop("kbps")
        if not isinstance(kbps_list, (list, tuple)):
            kbps_list = [kbps_list]
        duration = float(src.pop("duration_s", 400.0))
        traces = [
            constant_trace(float(k), duration_s=duration, trace_id=f"p{path_index}const{i}-{k:g}")
            for i, k in enumerate(kbps_list)
        ]
    else:
        raise ConfigError(f"unknown trace source kind {kind!r}")
    if path_cfg.mean_band_kbps is not None:
        lo, hi = path_cfg.mean_band_kbps
        traces = filter_by_mean(traces, lo, hi)
    if not traces:
        raise ConfigError(f"path {path_index}: trace pool empty after filtering")
    return traces


class StreamingEnv:
    """Multi-path streaming episodes behind a reset/step interface."""

    def __init__(
        self,
        cfg: EnvConfig,
        *,
        pools: Optional[list[list[BandwidthTrace]]] = None,
        split: Optional[str] = "test",
    ):
        """`pools` overrides trace loading entirely; otherwise each path's
        pool is built from the config and reduced to its train or test
        split (`split=None` keeps the whole pool)."""
        self.cfg = cfg
        self.manifest = cfg.manifest()
        self.space = ActionSpace(cfg.action_space, cfg.window_size, self.manifest.ladder.num_levels)
        if pools is not None:
            if len(pools) != len(cfg.paths):
                raise ConfigError("pools must have one list per path")
            self.pools = [list(p) for p in pools]
        else:
            self.pools = [build_pool(p, i) for i, p in enumerate(cfg.paths)]
            if split is not None:
                picked = []
                for pool in self.pools:
                    train, test = TraceSet(
                        tuple(pool), split_seed=cfg.split_seed, train_fraction=cfg.train_fraction
                    ).split()
                    picked.append(train if split == "train" else test)
                self.pools = picked
        for i, pool in enumerate(self.pools):
            if not pool:
                raise ConfigError(f"path {i}: empty trace pool (after split/filter)")
        self.engine: Optional[SimEngine] = None
        self._last_mask: Optional[np.ndarray] = None
        self._decision: Optional[Decision] = None
        self.last_log: Optional[EpisodeLog] = None

    @property
    def num_paths(self) -> int:
        return len(self.pools)

    @property
    def observation_size(self) -> int:
        p, w, l = self.num_paths, self.space.window, self.space.num_levels
        return p * 6 + w * l + w + 3 + p * 6

    def reset(self, episode_seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(episode_seed)
        traces, offsets = [], []
        for pool in self.pools:
            trace = pool[int(rng.integers(len(pool)))]
            traces.append(trace)
            offsets.append(float(rng.random() * trace.duration_s))
        self.engine = SimEngine(
            self.manifest,
            traces,
            reward=self.cfg.reward_config(),
            buffer_max_s=self.cfg.buffer_max_s,
            window=self.cfg.window_size,
            rtt=self.cfg.rtt,
            num_chunks=self.cfg.num_chunks,
            seed=int(rng.integers(2**31 - 1)),
            episode_offsets_s=offsets,
        )
        self.last_log = None
        result = self.engine.advance_until_decision()
        assert isinstance(result, Decision)  # a fresh episode always needs a request
        self._decision = result
        return self._observe_and_mask()

    def _observe_and_mask(self) -> tuple[np.ndarray, np.ndarray]:
        eng = self.engine
        obs = eng.observe(self._decision.path_id)
        mask = compute_mask(self.space, eng.playing_index, eng.requested, eng.num_chunks)
        self._last_mask = mask
        return obs, mask

    @property
    def info(self) -> dict:
        """Raw state for policies/logging at the current decision point."""
        info = self.engine.observation_info()
        info["path_id"] = self._decision.path_id if self._decision else None
        return info

    def _substitute(self, action: int) -> int:
        valid = np.flatnonzero(self._last_mask)
        best = valid[np.argmin(np.abs(valid - action))]
        logger.warning("invalid action %d substituted with nearest valid %d", action, best)
        return int(best)

    def step(self, action: int) -> tuple[np.ndarray, np.ndarray, float, bool, dict]:
        if self.engine is None or self._decision is None:
            raise ConfigError("step() before reset(), or episode already finished")
        action = int(action)
        if not 0 <= action < self.space.size or not self._last_mask[action]:
            if self.cfg.strict:
                raise ValueError(f"action {action} is masked invalid at this step")
            action = self._substitute(action)
        offset, level = self.space.decode(action)
        if offset is None:  # level-only space: greedy chunk order
            from .policies import greedy_next_index

            eng = self.engine
            offset = (
                greedy_next_index(eng.playing_index, eng.requested, eng.num_chunks, eng.window)
                - eng.playing_index
            )
        path_id = self._decision.path_id
        self.engine.apply_action(path_id, offset, level)
        result = self.engine.advance_until_decision()
        if isinstance(result, Decision):
            self._decision = result
            obs, mask = self._observe_and_mask()
            outcome = self.engine.pending_outcome()
            info = {
                "path_id": result.path_id,
                "time": result.time,
                "played_chunks": outcome.played_chunks,
                "rebuffer_s": outcome.rebuffer_s,
            }
            return obs, mask, outcome.reward, False, info
        # Terminal: the residual window (after the last request) is this step's reward.
        self._decision = None
        self.last_log = self.engine.episode_log()
        obs = self.engine.observe(path_id)
        mask = np.zeros(self.space.size, dtype=bool)
        self._last_mask = None
        info = {
            "path_id": None,
            "time": self.engine.now,
            "played_chunks": result.played_chunks,
            "rebuffer_s": result.rebuffer_s,
            "episode": self.last_log.summary(),
        }
        return obs, mask, result.reward, True, info
