import json
import math
import subprocess
import sys

import pytest

from densewatch.cli import OPTIONS, FLAGS, build_parser, main, resolve_settings, tick_seed
from densewatch.datasets import StreamSpec, TWO_TRIANGLES, planted_anomaly_stream, write_stream_csv


def triangles_csv(tmp_path, labels=True):
    path = tmp_path / "tri.csv"
    rows = [f"h{u},h{v},0" + (",0" if labels else "") for u, v in TWO_TRIANGLES]
    path.write_text("\n".join(rows) + "\n")
    return path


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_missing_file_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 2


def test_empty_file_exits_3(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 3


def test_unlabelled_eval_exits_4(tmp_path):
    path = triangles_csv(tmp_path, labels=False)
    assert main(["eval", str(path), "--out", str(tmp_path / "o")]) == 4


def test_bad_parameter_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["run", str(triangles_csv(tmp_path)), "--lambda", "2"])
    assert exc.value.code == 2


def test_two_triangle_run(tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(triangles_csv(tmp_path)), "--out", str(out), "--k", "1", "--fi-threshold", "0",
                 "--save-state"]) == 0
    lines = read_jsonl(out / "reports.jsonl")
    report, summary = lines
    assert report["tick"] == 0 and len(report["top"]) == 1
    assert report["top"][0]["q_c"] == pytest.approx(0.25)
    assert len(report["flagged"]) == 3
    assert {f["src"] for f in report["flagged"]} | {f["dst"] for f in report["flagged"]} in (
        {"h1", "h2", "h3"},
        {"h4", "h5", "h6"},
    )
    assert summary["summary"] is True and summary["events"] == 6
    header = (out / "traces" / "tick_0.csv").read_text().splitlines()[0]
    assert header == "iteration,modularity,switches"
    assert (out / "state" / "tick_0.bin").stat().st_size > 0


def test_help_lists_every_option():
    text = build_parser()._subparsers._group_actions[0].choices["run"].format_help()
    for key in list(OPTIONS) + list(FLAGS):
        assert f"--{key}" in text


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "densewatch", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sketch-stats" in res.stdout


def parse(argv):
    return build_parser().parse_args(argv)


def test_config_file_and_flag_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.conf"
    cfg.write_text("lambda = 0.5  # comment\nk = 4\nseed = 11\ncarry_over = yes\n")
    monkeypatch.setenv("DENSEWATCH_SEED", "99")
    s = resolve_settings(parse(["run", "x.csv", "--config", str(cfg), "--k", "7"]))
    assert s["lambda"] == 0.5 and s["k"] == 7 and s["seed"] == 11 and s["carry-over"] is True
    s = resolve_settings(parse(["run", "x.csv"]))
    assert s["seed"] == 99 and s["lambda"] == 0.8
    monkeypatch.delenv("DENSEWATCH_SEED")
    assert resolve_settings(parse(["run", "x.csv"]))["seed"] == 0


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.conf"
    cfg.write_text("colour = red\n")
    with pytest.raises(SystemExit):
        main(["run", "x.csv", "--config", str(cfg)])


def test_tick_seed_depends_on_tick():
    assert tick_seed(1, 0) != tick_seed(1, 1) and tick_seed(1, 5) == tick_seed(1, 5)


def test_workers_do_not_change_output(tmp_path):
    path = tmp_path / "s.csv"
    write_stream_csv(planted_anomaly_stream(StreamSpec(ticks=3)), path)
    outs = []
    for workers in ("1", "2"):
        out = tmp_path / f"o{workers}"
        assert main(["run", str(path), "--out", str(out), "--workers", workers, "--seed", "4"]) == 0
        outs.append((out / "reports.jsonl").read_text())
    assert outs[0] == outs[1]


def test_eval_writes_summary(tmp_path):
    path = tmp_path / "s.csv"
    write_stream_csv(planted_anomaly_stream(StreamSpec(ticks=2)), path)
    out = tmp_path / "o"
    assert main(["eval", str(path), "--out", str(out)]) == 0
    summary = json.loads((out / "evaluation.json").read_text())
    assert 0.0 <= summary["mean_precision"] <= 1.0


def test_bench_outputs(tmp_path):
    out = tmp_path / "o"
    assert main(["bench", str(triangles_csv(tmp_path)), "--out", str(out), "--seeds", "2"]) == 0
    bench = json.loads((out / "bench.json").read_text())
    assert len(bench["ticks"]["0"]["tgdc"]["runs"]) == 2
    for mode in ("tgdc", "gcd"):
        trace = (out / "traces" / f"bench_tick_0_{mode}.csv").read_text().splitlines()
        assert trace[0] == "iteration,modularity,switches"


def test_sketch_stats(tmp_path, capsys):
    path = tmp_path / "chain.csv"
    path.write_text("".join(f"n{i % 1000},n{(i * 7 + 1) % 1000},0\n" for i in range(10_000)))
    assert main(["sketch-stats", str(path)]) == 0
    stats = json.loads(capsys.readouterr().out.strip())
    assert stats["total_mass"] == 10_000
    assert stats["error_bound"] == pytest.approx(stats["distinct_edge_estimate"] * math.e / 719 / 2, rel=1e-9)
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["sketch-stats", str(empty)]) == 0
    assert json.loads(capsys.readouterr().out.strip())["total_mass"] == 0
