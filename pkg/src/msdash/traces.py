"""Bandwidth traces: ingest, filtering, train/test split, replay, transfer times.

Canonical units everywhere: seconds for time, Kbps for bandwidth, bytes for
sizes.  Format adapters normalise vendor files to those units at load time.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ._kernels import transfer_time


class TraceParseError(ValueError):
    """Malformed trace file; message carries file name and line number."""


@dataclass(frozen=True)
class BandwidthTrace:
    """One path's piecewise-constant throughput series.

    Sample i holds on [offsets_s[i], offsets_s[i+1]); the last sample holds
    for one granularity interval, so the circulated duration is
    last offset + granularity.  Replay wraps modulo that duration.
    """

    id: str
    offsets_s: np.ndarray
    kbps: np.ndarray
    granularity_s: float

    def __post_init__(self) -> None:
        offs = np.asarray(self.offsets_s, dtype=np.float64)
        bw = np.asarray(self.kbps, dtype=np.float64)
        if offs.size == 0:
            raise TraceParseError(f"trace {self.id!r} is empty")
        if offs.shape != bw.shape:
            raise TraceParseError(f"trace {self.id!r}: offsets/bandwidth length mismatch")
        if offs[0] != 0.0 or (np.diff(offs) <= 0).any():
            raise TraceParseError(f"trace {self.id!r}: offsets must start at 0 and strictly increase")
        if (bw <= 0).any():
            raise TraceParseError(f"trace {self.id!r}: bandwidth values must be > 0")
        if self.granularity_s <= 0:
            raise TraceParseError(f"trace {self.id!r}: granularity must be > 0")
        offs.setflags(write=False)
        bw.setflags(write=False)
        object.__setattr__(self, "offsets_s", offs)
        object.__setattr__(self, "kbps", bw)

    @property
    def duration_s(self) -> float:
        return float(self.offsets_s[-1]) + self.granularity_s

    @property
    def mean_kbps(self) -> float:
        return float(self.kbps.mean())

    def bandwidth_at(self, t: float) -> float:
        """Bandwidth at time t (seconds), circulating past the trace end."""
        tm = t % self.duration_s
        idx = int(np.searchsorted(self.offsets_s, tm, side="right")) - 1
        return float(self.kbps[idx])


def download_duration(
    trace: BandwidthTrace, start_s: float, num_bytes: float, rtt_s: float
) -> float:
    """Request-to-last-byte time for a transfer beginning at `start_s`.

    RTT is dead time before any byte flows; the payload then drains the
    circulated piecewise-constant trace.
    """
    if num_bytes <= 0:
        raise ValueError(f"num_bytes must be > 0, got {num_bytes}")
    if rtt_s < 0:
        raise ValueError(f"rtt_s must be >= 0, got {rtt_s}")
    kbits = num_bytes * 0.008
    return rtt_s + float(
        transfer_time(trace.offsets_s, trace.kbps, trace.duration_s, start_s + rtt_s, kbits)
    )


def sample_episode_start(trace: BandwidthTrace, rng: np.random.Generator) -> float:
    """Uniform start offset in [0, duration)."""
    return float(rng.random() * trace.duration_s)


def filter_by_mean(
    traces: Iterable[BandwidthTrace], low_kbps: float, high_kbps: float
) -> list[BandwidthTrace]:
    """Keep exactly the traces whose mean bandwidth lies in [low, high]."""
    if low_kbps >= high_kbps:
        raise ValueError(f"need low < high, got [{low_kbps}, {high_kbps}]")
    return [t for t in traces if low_kbps <= t.mean_kbps <= high_kbps]


@dataclass(frozen=True)
class TraceSet:
    """A pool of traces with a deterministic train/test partition."""

    traces: tuple[BandwidthTrace, ...]
    split_seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self) -> None:
        object.__setattr__(self, "traces", tuple(self.traces))
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")

    def split(self) -> tuple[list[BandwidthTrace], list[BandwidthTrace]]:
        """Disjoint, exhaustive (train, test) partition.

        The partition depends only on (trace ids, split_seed, train_fraction):
        ids are sorted before the seeded shuffle, so load order is irrelevant.
        """
        if len(self.traces) < 2:
            raise ValueError(f"need at least 2 traces to split, got {len(self.traces)}")
        by_id = {t.id: t for t in self.traces}
        if len(by_id) != len(self.traces):
            raise ValueError("trace ids must be unique for a stable split")
        ids = sorted(by_id)
        perm = np.random.default_rng(self.split_seed).permutation(len(ids))
        n_train = int(self.train_fraction * len(ids))
        train_ids = {ids[i] for i in perm[:n_train]}
        train = [t for t in self.traces if t.id in train_ids]
        test = [t for t in self.traces if t.id not in train_ids]
        return train, test


# ----------------------------- loading -----------------------------

def _parse_canonical(path: Path, floor_kbps: float) -> BandwidthTrace:
    offsets: list[float] = []
    kbps: list[float] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split(",")
        if len(parts) != 2:
            raise TraceParseError(f"{path}:{lineno}: expected 'offset_s,kbps', got {line!r}")
        try:
            offsets.append(float(parts[0]))
            kbps.append(max(float(parts[1]), floor_kbps))
        except ValueError:
            raise TraceParseError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
    if not offsets:
        raise TraceParseError(f"{path}: trace has no samples")
    granularity = offsets[-1] - offsets[-2] if len(offsets) > 1 else 1.0
    base = offsets[0]
    return BandwidthTrace(
        id=path.stem,
        offsets_s=np.array(offsets) - base,
        kbps=np.array(kbps),
        granularity_s=granularity,
    )


def _read_csv_rows(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise TraceParseError(f"{path}: missing CSV header")
        return list(reader.fieldnames), list(reader)


def _to_kbps(value: str, unit: str, path: Path, lineno: int) -> float:
    try:
        x = float(value)
    except ValueError:
        raise TraceParseError(f"{path}:{lineno}: non-numeric bandwidth {value!r}") from None
    if unit == "kbps":
        return x
    if unit == "bps":
        return x / 1000.0
    if unit == "bytes_per_s":
        return x * 0.008
    raise ValueError(f"unknown bandwidth unit {unit!r}")


def _parse_grouped_csv(
    path: Path,
    id_column: str,
    value_column: str,
    unit: str,
    granularity_s: float,
    floor_kbps: float,
) -> list[BandwidthTrace]:
    """One file holding many traces keyed by an id column (broadband-style)."""
    fields, rows = _read_csv_rows(path)
    for col in (id_column, value_column):
        if col not in fields:
            raise TraceParseError(f"{path}: missing column {col!r} (have {fields})")
    groups: dict[str, list[float]] = {}
    for lineno, row in enumerate(rows, start=2):
        kbps = max(_to_kbps(row[value_column], unit, path, lineno), floor_kbps)
        groups.setdefault(row[id_column], []).append(kbps)
    traces = []
    for key, series in groups.items():
        offsets = np.arange(len(series), dtype=np.float64) * granularity_s
        traces.append(
            BandwidthTrace(
                id=f"{path.stem}:{key}",
                offsets_s=offsets,
                kbps=np.array(series),
                granularity_s=granularity_s,
            )
        )
    if not traces:
        raise TraceParseError(f"{path}: no data rows")
    return traces


def _parse_column_csv(
    path: Path, value_column: str, unit: str, granularity_s: float, floor_kbps: float
) -> BandwidthTrace:
    """One trace per file, bandwidth in a named column (cellular-style)."""
    fields, rows = _read_csv_rows(path)
    if value_column not in fields:
        raise TraceParseError(f"{path}: missing column {value_column!r} (have {fields})")
    kbps = [
        max(_to_kbps(row[value_column], unit, path, lineno), floor_kbps)
        for lineno, row in enumerate(rows, start=2)
    ]
    if not kbps:
        raise TraceParseError(f"{path}: no data rows")
    offsets = np.arange(len(kbps), dtype=np.float64) * granularity_s
    return BandwidthTrace(
        id=path.stem, offsets_s=offsets, kbps=np.array(kbps), granularity_s=granularity_s
    )


def load_traces(
    path: str | Path,
    fmt: str = "canonical",
    *,
    id_column: str = "unit_id",
    value_column: str | None = None,
    unit: str | None = None,
    granularity_s: float | None = None,
    floor_kbps: float = 1.0,
) -> list[BandwidthTrace]:
    """Load traces from a file or directory under the named adapter.

    Formats: ``canonical`` ("offset_s,kbps" lines, '#' comments),
    ``fcc`` (grouped CSV, 10 s granularity, bytes/s by default) and
    ``lte`` (one CSV per file, 1 s granularity, Kbps by default).
    Column names and units are configurable because vendor schemata vary.
    Non-positive bandwidth samples are clamped up to `floor_kbps`.
    """
    p = Path(path)
    if p.is_dir():
        files = sorted(x for x in p.iterdir() if x.is_file() and not x.name.startswith("."))
        if not files:
            raise TraceParseError(f"{p}: directory holds no trace files")
    elif p.is_file():
        files = [p]
    else:
        raise FileNotFoundError(p)

    out: list[BandwidthTrace] = []
    if fmt == "canonical":
        out = [_parse_canonical(f, floor_kbps) for f in files]
    elif fmt == "fcc":
        for f in files:
            out.extend(
                _parse_grouped_csv(
                    f,
                    id_column=id_column,
                    value_column=value_column or "bytes_sec",
                    unit=unit or "bytes_per_s",
                    granularity_s=granularity_s or 10.0,
                    floor_kbps=floor_kbps,
                )
            )
    elif fmt == "lte":
        out = [
            _parse_column_csv(
                f,
                value_column=value_column or "DL_bitrate",
                unit=unit or "kbps",
                granularity_s=granularity_s or 1.0,
                floor_kbps=floor_kbps,
            )
            for f in files
        ]
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    return out


# ----------------------------- synthetic traces -----------------------------

def constant_trace(kbps: float, *, duration_s: float = 400.0, granularity_s: float = 1.0,
                   trace_id: str = "constant") -> BandwidthTrace:
    n = max(1, int(round(duration_s / granularity_s)))
    return BandwidthTrace(
        id=trace_id,
        offsets_s=np.arange(n, dtype=np.float64) * granularity_s,
        kbps=np.full(n, float(kbps)),
        granularity_s=granularity_s,
    )


def square_trace(low_kbps: float, high_kbps: float, *, period_s: float = 20.0,
                 duration_s: float = 400.0, granularity_s: float = 1.0,
                 trace_id: str = "square") -> BandwidthTrace:
    n = max(2, int(round(duration_s / granularity_s)))
    offsets = np.arange(n, dtype=np.float64) * granularity_s
    phase = np.floor(offsets / (period_s / 2.0)).astype(np.int64) % 2
    kbps = np.where(phase == 0, float(high_kbps), float(low_kbps))
    return BandwidthTrace(id=trace_id, offsets_s=offsets, kbps=kbps, granularity_s=granularity_s)


def random_walk_trace(
    low_kbps: float,
    high_kbps: float,
    *,
    seed: int,
    duration_s: float = 400.0,
    granularity_s: float = 1.0,
    step_kbps: float | None = None,
    trace_id: str | None = None,
) -> BandwidthTrace:
    """Seeded bounded random walk, reflected into [low, high] Kbps."""
    if low_kbps <= 0 or high_kbps <= low_kbps:
        raise ValueError(f"need 0 < low < high, got [{low_kbps}, {high_kbps}]")
    rng = np.random.default_rng(seed)
    n = max(2, int(round(duration_s / granularity_s)))
    step = step_kbps if step_kbps is not None else (high_kbps - low_kbps) / 10.0
    values = np.empty(n)
    x = rng.uniform(low_kbps, high_kbps)
    for i in range(n):
        values[i] = x
        x += rng.uniform(-step, step)
        if x < low_kbps:
            x = 2 * low_kbps - x
        if x > high_kbps:
            x = 2 * high_kbps - x
        x = min(max(x, low_kbps), high_kbps)
    return BandwidthTrace(
        id=trace_id or f"walk-{seed}",
        offsets_s=np.arange(n, dtype=np.float64) * granularity_s,
        kbps=values,
        granularity_s=granularity_s,
    )


def walk_pool(
    count: int,
    low_kbps: float,
    high_kbps: float,
    *,
    seed: int,
    duration_s: float = 400.0,
    granularity_s: float = 1.0,
    prefix: str = "walk",
) -> list[BandwidthTrace]:
    """A pool of bounded random walks; means always land inside the band."""
    return [
        random_walk_trace(
            low_kbps,
            high_kbps,
            seed=seed + k,
            duration_s=duration_s,
            granularity_s=granularity_s,
            trace_id=f"{prefix}-{seed + k}",
        )
        for k in range(count)
    ]


def write_canonical(trace: BandwidthTrace, path: str | Path) -> None:
    lines = [f"# trace {trace.id}, granularity {trace.granularity_s:g} s"]
    lines += [f"{o:g},{b:g}" for o, b in zip(trace.offsets_s, trace.kbps)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
