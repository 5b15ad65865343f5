import json
from pathlib import Path

import pytest

from msdash.cli import main


def write_config(tmp_path, num_chunks=12, kbps=(2000, 2000)):
    p = tmp_path / "env.yaml"
    p.write_text(
        f"""
num_chunks: {num_chunks}
rtt: {{kind: constant, low_s: 0.0}}
paths:
  - source: {{kind: constant, kbps: [{kbps[0]}, {kbps[0]}]}}
  - source: {{kind: constant, kbps: [{kbps[1]}, {kbps[1]}]}}
"""
    )
    return p


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


class TestRun:
    def test_summary_identity_and_files(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "run.jsonl"
        rc = main([
            "run", "--config", str(cfg), "--policy", "throughput",
            "--episodes", "4", "--seed", "3", "--out", str(out),
        ])
        assert rc == 0
        lines = read_jsonl(out)
        assert lines[0]["type"] == "header" and lines[0]["seed"] == 3
        summary = lines[-1]
        assert summary["type"] == "summary"
        want = (
            summary["utility"]["mean"]
            - summary["switch_penalty"]["mean"]
            - summary["rebuffer_penalty"]["mean"]
        )
        assert summary["reward"]["mean"] == pytest.approx(want, rel=1e-9)
        shown = capsys.readouterr().out
        assert "reward" in shown and "rebuffer_penalty" in shown

    def test_rerun_identical_output(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        args = ["run", "--config", str(cfg), "--policy", "random", "--episodes", "3", "--seed", "7"]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_text() == out2.read_text()

    def test_throughput_on_fast_pair_no_rebuffer(self, tmp_path):
        cfg = write_config(tmp_path, kbps=(2000, 2000))
        out = tmp_path / "fast.jsonl"
        main(["run", "--config", str(cfg), "--policy", "throughput",
              "--episodes", "10", "--seed", "1", "--out", str(out)])
        summary = read_jsonl(out)[-1]
        assert summary["rebuffer_penalty"]["mean"] == 0.0

    def test_unknown_policy_exit_code(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["run", "--config", str(cfg), "--policy", "nope", "--episodes", "1"]) == 2

    def test_missing_trace_file_exit_code(self, tmp_path):
        assert main(["inspect-trace", str(tmp_path / "absent.txt")]) == 3


class TestInspectTrace:
    def test_constant_trace_stats(self, tmp_path, capsys):
        rc = main(["gen-traces", "--kind", "constant", "--count", "1",
                   "--high", "1000", "--out-dir", str(tmp_path / "tr")])
        assert rc == 0
        rc = main(["inspect-trace", str(tmp_path / "tr")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "1000.0" in out and "histogram" in out

    def test_two_traces_two_rows(self, tmp_path, capsys):
        main(["gen-traces", "--kind", "walk", "--count", "2", "--low", "300",
              "--high", "900", "--seed", "5", "--out-dir", str(tmp_path / "tr")])
        main(["inspect-trace", str(tmp_path / "tr")])
        out = capsys.readouterr().out
        rows = [l for l in out.splitlines() if l.startswith("walk-")]
        assert len(rows) == 2

    def test_parse_error_has_line_number(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("0,100\noops\n")
        assert main(["inspect-trace", str(bad)]) == 3
        assert "bad.txt:2" in capsys.readouterr().err


class TestTimeline:
    def test_fixed_policy_flat_levels_and_buffer_bound(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "tl.jsonl"
        rc = main(["timeline", "--config", str(cfg), "--policy", "fixed:2",
                   "--seed", "5", "--out", str(out)])
        assert rc == 0
        lines = read_jsonl(out)
        levels = [l["level"] for l in lines if l["type"] == "chunk"]
        assert levels and set(levels) == {2}
        buffers = [l["buffer_s"] for l in lines if l["type"] == "buffer"]
        assert max(buffers) <= 30.0 + 4.0 + 1e-9
        indices = [l["index"] for l in lines if l["type"] == "chunk"]
        assert indices == sorted(indices)  # greedy request order is 1..N


class TestGenTraces:
    def test_walk_traces_loadable_and_bounded(self, tmp_path):
        out_dir = tmp_path / "walks"
        main(["gen-traces", "--kind", "walk", "--count", "3", "--low", "400",
              "--high", "800", "--seed", "2", "--out-dir", str(out_dir)])
        from msdash.traces import load_traces

        traces = load_traces(out_dir)
        assert len(traces) == 3
        for t in traces:
            assert t.kbps.min() >= 400 and t.kbps.max() <= 800
