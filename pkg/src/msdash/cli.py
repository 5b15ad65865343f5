"""Batch experiment runner.

Subcommands:
  run           evaluate a named policy over trace scenarios, write per-episode
                records plus an aggregated QoE summary
  inspect-trace per-trace statistics and a pool-level mean histogram
  timeline      one episode's buffer occupancy / chunk-level time series
  gen-traces    synthetic trace generator (constant, square, random walk)
  serve-bridge  expose the environment over the stream-socket protocol
"""
from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .env import SCENARIOS, ConfigError, EnvConfig, StreamingEnv
from .policies import PolicyError, make_policy
from .traces import (
    TraceParseError,
    constant_trace,
    load_traces,
    random_walk_trace,
    square_trace,
    write_canonical,
)

EXIT_USAGE = 2
EXIT_DATA = 3


def _load_config(args) -> EnvConfig:
    cfg = EnvConfig.from_file(args.config) if args.config else EnvConfig()
    if getattr(args, "scenario", None):
        cfg = cfg.with_scenario(args.scenario)
    return cfg


def _policy_for(env: StreamingEnv, name: str, seed: int):
    return make_policy(
        name,
        env.space,
        ladder=env.manifest.ladder,
        chunk_length_s=env.manifest.chunk_length_s,
        buffer_max_s=env.cfg.buffer_max_s,
        seed=seed,
    )


def run_episode(env: StreamingEnv, policy, episode_seed: int):
    """One full episode; returns the engine's EpisodeLog."""
    obs, mask = env.reset(episode_seed)
    done = False
    while not done:
        action = policy.decide(obs, mask, env.info)
        obs, mask, _reward, done, _info = env.step(action)
    return env.last_log


def run_batch(cfg: EnvConfig, policy_name: str, episodes: int, seed: int, split="test"):
    """Evaluate a policy over `episodes` seeded episodes; returns (logs, summary)."""
    env = StreamingEnv(cfg, split=split)
    logs = []
    for ep in range(episodes):
        episode_seed = seed + ep
        policy = _policy_for(env, policy_name, seed=episode_seed)
        logs.append(run_episode(env, policy, episode_seed))
    summary = summarize(policy_name, logs)
    return logs, summary


def summarize(policy_name: str, logs) -> dict:
    def stats(values):
        return {
            "mean": statistics.fmean(values),
            "std": statistics.pstdev(values) if len(values) > 1 else 0.0,
        }

    return {
        "type": "summary",
        "policy": policy_name,
        "episodes": len(logs),
        "reward": stats([l.reward for l in logs]),
        "utility": stats([l.utility for l in logs]),
        "switch_penalty": stats([l.switch_penalty for l in logs]),
        "rebuffer_penalty": stats([l.rebuffer_penalty for l in logs]),
    }


def _print_summary(summary: dict) -> None:
    print(f"policy: {summary['policy']}  episodes: {summary['episodes']}")
    print(f"{'metric':<18}{'mean':>12}{'std':>12}")
    for key in ("reward", "utility", "switch_penalty", "rebuffer_penalty"):
        s = summary[key]
        print(f"{key:<18}{s['mean']:>12.2f}{s['std']:>12.2f}")


def _write_jsonl(path: Path, header: dict, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    cfg = _load_config(args)
    logs, summary = run_batch(cfg, args.policy, args.episodes, args.seed, split=args.split)
    if args.out:
        header = {
            "type": "header",
            "tool": f"msdash {__version__}",
            "command": "run",
            "policy": args.policy,
            "episodes": args.episodes,
            "seed": args.seed,
            "scenario": args.scenario,
            "split": args.split,
        }
        lines = []
        for log in logs:
            lines.extend(log.lines())
        lines.append(summary)
        _write_jsonl(Path(args.out), header, lines)
        print(f"wrote {args.out}")
    _print_summary(summary)
    return 0


def cmd_inspect_trace(args) -> int:
    traces = load_traces(args.path, args.format)
    print(f"{'trace':<28}{'samples':>9}{'duration_s':>12}{'mean':>10}{'min':>10}{'max':>10}")
    means = []
    for t in traces:
        means.append(t.mean_kbps)
        print(
            f"{t.id:<28}{len(t.kbps):>9}{t.duration_s:>12.1f}"
            f"{t.mean_kbps:>10.1f}{t.kbps.min():>10.1f}{t.kbps.max():>10.1f}"
        )
    counts, edges = np.histogram(means, bins=args.bins)
    print(f"\npool mean-bandwidth histogram ({len(means)} traces, Kbps):")
    for i, count in enumerate(counts):
        print(f"  [{edges[i]:8.1f}, {edges[i + 1]:8.1f})  {count}")
    return 0


def cmd_timeline(args) -> int:
    cfg = _load_config(args)
    env = StreamingEnv(cfg, split=args.split)
    policy = _policy_for(env, args.policy, seed=args.seed)
    log = run_episode(env, policy, args.seed)
    lines = [
        {"type": "buffer", "time": t, "buffer_s": b} for t, b in log.buffer_series
    ]
    lines += [
        {"type": "chunk", "index": c.index, "level": c.level, "path": c.path,
         "request_time": c.request_time, "play_time": c.play_time}
        for c in log.chunks
    ]
    lines.append(log.summary())
    header = {
        "type": "header",
        "tool": f"msdash {__version__}",
        "command": "timeline",
        "policy": args.policy,
        "seed": args.seed,
    }
    _write_jsonl(Path(args.out), header, lines)
    print(f"wrote {args.out} ({len(log.buffer_series)} buffer points, {len(log.chunks)} chunks)")
    return 0


def cmd_gen_traces(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        if args.kind == "constant":
            trace = constant_trace(
                args.high, duration_s=args.duration, granularity_s=args.granularity,
                trace_id=f"constant-{args.high:g}-{k}",
            )
        elif args.kind == "square":
            trace = square_trace(
                args.low, args.high, period_s=args.period, duration_s=args.duration,
                granularity_s=args.granularity, trace_id=f"square-{k}",
            )
        else:
            trace = random_walk_trace(
                args.low, args.high, seed=args.seed + k, duration_s=args.duration,
                granularity_s=args.granularity,
            )
        write_canonical(trace, out_dir / f"{trace.id}.txt")
    print(f"wrote {args.count} {args.kind} trace(s) to {out_dir}")
    return 0


def cmd_serve_bridge(args) -> int:
    from .bridge import BridgeServer

    cfg = _load_config(args)
    env_factory = lambda: StreamingEnv(cfg, split=args.split)  # noqa: E731
    server = BridgeServer(args.host, args.port, env_factory)
    host, port = server.endpoint
    print(f"bridge listening on {host}:{port} (one env per connection)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msdash", description="Multi-source streaming simulator and experiment runner."
    )
    parser.add_argument("--version", action="version", version=f"msdash {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a policy over seeded episodes")
    run.add_argument("--config", help="environment config file (YAML)")
    run.add_argument("--policy", required=True,
                     help="throughput | bola | random | fixed:<level> | scripted:<file>")
    run.add_argument("--episodes", type=int, default=30)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", help="JSONL output path")
    run.add_argument("--scenario", choices=sorted(SCENARIOS), help="preset mean-bandwidth bands")
    run.add_argument("--split", choices=["train", "test"], default="test")
    run.set_defaults(func=cmd_run)

    ins = sub.add_parser("inspect-trace", help="per-trace stats and mean histogram")
    ins.add_argument("path")
    ins.add_argument("--format", default="canonical", choices=["canonical", "fcc", "lte"])
    ins.add_argument("--bins", type=int, default=10)
    ins.set_defaults(func=cmd_inspect_trace)

    tl = sub.add_parser("timeline", help="buffer/quality time series of one episode")
    tl.add_argument("--config")
    tl.add_argument("--policy", required=True)
    tl.add_argument("--seed", type=int, default=0)
    tl.add_argument("--out", required=True)
    tl.add_argument("--scenario", choices=sorted(SCENARIOS))
    tl.add_argument("--split", choices=["train", "test"], default="test")
    tl.set_defaults(func=cmd_timeline)

    gen = sub.add_parser("gen-traces", help="write synthetic canonical traces")
    gen.add_argument("--kind", choices=["constant", "square", "walk"], default="walk")
    gen.add_argument("--count", type=int, default=10)
    gen.add_argument("--low", type=float, default=300.0, help="Kbps")
    gen.add_argument("--high", type=float, default=2000.0, help="Kbps")
    gen.add_argument("--duration", type=float, default=400.0, help="seconds")
    gen.add_argument("--granularity", type=float, default=1.0, help="seconds per sample")
    gen.add_argument("--period", type=float, default=20.0, help="square-wave period (s)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out-dir", required=True)
    gen.set_defaults(func=cmd_gen_traces)

    srv = sub.add_parser("serve-bridge", help="serve the environment protocol endpoint")
    srv.add_argument("--config")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=5555)
    srv.add_argument("--scenario", choices=sorted(SCENARIOS))
    srv.add_argument("--split", choices=["train", "test"], default="train")
    srv.set_defaults(func=cmd_serve_bridge)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PolicyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
