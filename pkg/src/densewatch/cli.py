"""``densewatch`` command line.

Subcommands::

    run           detect dense communities tick by tick, write JSONL + traces
    eval          run, then score flagged events against the label column
    bench         paired convergence traces, retention on (lam) vs. off (lam=1)
    sketch-stats  sketch fill and error-bound figures, no game loop

Settings come from flags, then an optional ``--config`` file of flat
``key = value`` lines, then built-in defaults. ``DENSEWATCH_SEED`` supplies
the seed when neither a flag nor the config file does.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .anomaly import AnomalyReport, dense_communities, evaluate, score_edges, write_reports
from .engine import EngineConfig, run_gcd, run_tick, write_trace_csv
from .game import ParameterError
from .modularity import DegenerateInputError, modularity_error_bound
from .sketches import MASK64, fmix64, splitmix64
from .snapshot import SketchConfig, SnapshotBuilder
from .streams import LoadedStream, load_stream

log = logging.getLogger("densewatch")

EXIT_OK = 0
EXIT_UNREADABLE = 2
EXIT_NO_EVENTS = 3
EXIT_LABELS = 4

# name -> (type, default, help)
OPTIONS = {
    "lambda": (float, 0.8, "retention rate; 1 disables retention"),
    "eta": (float, 0.99, "NMI threshold between checkpoints for termination"),
    "k": (int, 10, "number of top communities reported per tick"),
    "min-size": (int, 3, "smallest community considered dense"),
    "cms-width": (int, 719, "count-min sketch width"),
    "cms-depth": (int, 2, "count-min sketch depth"),
    "fi-capacity": (int, 4096, "frequent-items sketch capacity"),
    "fi-threshold": (float, 0.3, "fraction of the mean count a node needs to play"),
    "tick-width": (float, 1.0, "timestamp units per tick"),
    "seed": (int, None, "random seed (falls back to DENSEWATCH_SEED, then 0)"),
    "retention-variant": (str, "eq6", "retention formula: eq6 or example"),
    "gamma": (float, 1.0, "modularity resolution"),
    "max-iters-factor": (int, 50, "iteration cap per tick, as a multiple of the node count"),
    "nmi-window": (int, 0, "iterations between termination checks (0 = node count)"),
    "workers": (int, 1, "worker processes across ticks (ignored with carry-over or accumulate)"),
    "seeds": (int, 10, "bench only: number of seeds per mode"),
}
FLAGS = {"carry-over": "start each tick from the previous tick's communities",
         "accumulate": "keep sketch state across ticks instead of resetting"}


class ConfigError(Exception):
    pass


@dataclass
class Settings:
    values: dict

    def __getitem__(self, name):
        return self.values[name]

    def sketch_config(self) -> SketchConfig:
        return SketchConfig(
            cms_width=self["cms-width"],
            cms_depth=self["cms-depth"],
            fi_capacity=self["fi-capacity"],
            seed=self["seed"],
            accumulate=self["accumulate"],
        )

    def engine_config(self, seed: Optional[int] = None) -> EngineConfig:
        return EngineConfig(
            lam=self["lambda"],
            eta=self["eta"],
            nmi_window=self["nmi-window"],
            max_iterations_factor=self["max-iters-factor"],
            fi_threshold=self["fi-threshold"],
            gamma=self["gamma"],
            retention_variant=self["retention-variant"],
            seed=self["seed"] if seed is None else seed,
            carry_over_partition=self["carry-over"],
        )


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("_", "-")
            if key not in OPTIONS and key not in FLAGS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _coerce(key: str, raw):
    if key in FLAGS:
        if isinstance(raw, bool):
            return raw
        text = str(raw).lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    kind = OPTIONS[key][0]
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def resolve_settings(args: argparse.Namespace, environ=os.environ) -> Settings:
    file_values = read_config_file(args.config) if args.config else {}
    values = {}
    for key in list(OPTIONS) + list(FLAGS):
        flag = getattr(args, key.replace("-", "_"))
        if flag is not None:
            values[key] = flag
        elif key in file_values:
            values[key] = _coerce(key, file_values[key])
        elif key == "seed" and environ.get("DENSEWATCH_SEED"):
            values[key] = _coerce(key, environ["DENSEWATCH_SEED"])
        elif key in FLAGS:
            values[key] = False
        else:
            values[key] = OPTIONS[key][1]
    if values["seed"] is None:
        values["seed"] = 0
    values["seed"] &= MASK64
    return Settings(values)


def tick_seed(seed: int, tick: int) -> int:
    """Per-tick engine seed, independent of processing order."""
    return splitmix64(seed ^ fmix64(tick & MASK64))[1]


# -- per-tick pipeline ------------------------------------------------------------------


@dataclass
class TickOutcome:
    report: AnomalyReport
    result: object  # TickResult or None when the tick had no playable nodes
    snapshot: object


def _analyze(snapshot, events, settings: Settings, prev=None) -> TickOutcome:
    cfg = settings.engine_config(tick_seed(settings["seed"], snapshot.tick))
    try:
        result = run_tick(snapshot, prev, cfg)
    except DegenerateInputError as exc:
        log.warning("tick %d skipped: %s", snapshot.tick, exc)
        return TickOutcome(AnomalyReport(snapshot.tick, [], [], settings["k"]), None, snapshot)
    top = dense_communities(snapshot, result.partition, settings["k"], settings["min-size"], settings["gamma"])
    flagged = score_edges(result.partition, top, events)
    return TickOutcome(AnomalyReport(snapshot.tick, top, flagged, settings["k"]), result, snapshot)


def _fresh_snapshot(tick: int, events, sketch: SketchConfig):
    builder = SnapshotBuilder(tick, sketch)
    builder.ingest_many([e.src for e in events], [e.dst for e in events])
    return builder.seal()


def _tick_job(job) -> TickOutcome:
    tick, events, settings = job
    return _analyze(_fresh_snapshot(tick, events, settings.sketch_config()), events, settings)


def process_stream(stream: LoadedStream, settings: Settings) -> list[TickOutcome]:
    """Snapshot, game and scoring for every tick, in tick order."""
    sequential = settings["carry-over"] or settings["accumulate"] or settings["workers"] <= 1
    if not sequential:
        jobs = [(t, stream.events_by_tick[t], settings) for t in stream.ticks]
        with ProcessPoolExecutor(max_workers=settings["workers"]) as pool:
            return list(pool.map(_tick_job, jobs))
    outcomes = []
    sketch = settings.sketch_config()
    prev_snapshot = None
    prev_partition = None
    for t in stream.ticks:
        events = stream.events_by_tick[t]
        if settings["accumulate"] and prev_snapshot is not None:
            builder = SnapshotBuilder.continuing(prev_snapshot, t)
            builder.ingest_many([e.src for e in events], [e.dst for e in events])
            snapshot = builder.seal()
        else:
            snapshot = _fresh_snapshot(t, events, sketch)
        outcome = _analyze(snapshot, events, settings, prev_partition)
        outcomes.append(outcome)
        prev_snapshot = snapshot
        if outcome.result is not None:
            prev_partition = outcome.result.partition
    return outcomes


# -- subcommands --------------------------------------------------------------------------


def _load(args, settings) -> tuple[Optional[LoadedStream], int]:
    try:
        stream = load_stream(args.stream, settings["tick-width"])
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read {args.stream}: {exc}", file=sys.stderr)
        return None, EXIT_UNREADABLE
    if stream.malformed:
        print(f"skipped {stream.malformed} malformed line(s)", file=sys.stderr)
    if stream.event_count == 0:
        print(f"error: no events in {args.stream}", file=sys.stderr)
        return None, EXIT_NO_EVENTS
    return stream, EXIT_OK


def _write_outputs(out: Path, stream: LoadedStream, outcomes, summary=None, save_state: bool = False) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    traces = out / "traces"
    traces.mkdir(exist_ok=True)
    totals = {
        "summary": True,
        "ticks": len(outcomes),
        "events": stream.event_count,
        "flagged": sum(len(o.report.flagged_edges) for o in outcomes),
        "converged_ticks": sum(1 for o in outcomes if o.result is not None and o.result.converged),
        "malformed_lines": stream.malformed,
    }
    with open(out / "reports.jsonl", "w", encoding="utf-8") as fh:
        write_reports((o.report for o in outcomes), fh, stream.name)
        fh.write(json.dumps(totals, sort_keys=True) + "\n")
    for o in outcomes:
        if o.result is not None:
            with open(traces / f"tick_{o.report.tick}.csv", "w", newline="", encoding="utf-8") as fh:
                write_trace_csv(o.result, fh)
    if save_state:
        state = out / "state"
        state.mkdir(exist_ok=True)
        for o in outcomes:
            (state / f"tick_{o.report.tick}.bin").write_bytes(o.snapshot.to_bytes())
    if summary is not None:
        with open(out / "evaluation.json", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(summary.to_json(), sort_keys=True) + "\n")
    return totals


def cmd_run(args, settings: Settings) -> int:
    stream, code = _load(args, settings)
    if stream is None:
        return code
    outcomes = process_stream(stream, settings)
    totals = _write_outputs(Path(args.out), stream, outcomes, save_state=args.save_state)
    print(json.dumps(totals, sort_keys=True))
    return EXIT_OK


def cmd_eval(args, settings: Settings) -> int:
    stream, code = _load(args, settings)
    if stream is None:
        return code
    if not stream.fully_labelled:
        print(
            f"error: label column missing on {stream.unlabelled} event(s), "
            f"malformed on {stream.bad_labels}",
            file=sys.stderr,
        )
        return EXIT_LABELS
    outcomes = process_stream(stream, settings)
    summary = evaluate([o.report for o in outcomes], stream.events_by_tick)
    _write_outputs(Path(args.out), stream, outcomes, summary, save_state=args.save_state)
    mean = summary.mean_precision
    print(f"mean precision: {mean:.4f}" if mean is not None else "mean precision: not-applicable")
    print(json.dumps(summary.to_json(), sort_keys=True))
    return EXIT_OK


def cmd_bench(args, settings: Settings) -> int:
    stream, code = _load(args, settings)
    if stream is None:
        return code
    out = Path(args.out)
    traces = out / "traces"
    traces.mkdir(parents=True, exist_ok=True)
    sketch = settings.sketch_config()
    per_tick = {}
    all_runs = {"tgdc": [], "gcd": []}
    for t in stream.ticks:
        snapshot = _fresh_snapshot(t, stream.events_by_tick[t], sketch)
        runs = {"tgdc": [], "gcd": []}
        for i in range(settings["seeds"]):
            seed = tick_seed((settings["seed"] + i) & MASK64, t)
            cfg = settings.engine_config(seed)
            try:
                tgdc, gcd = run_tick(snapshot, None, cfg), run_gcd(snapshot, None, cfg)
            except DegenerateInputError as exc:
                log.warning("tick %d skipped: %s", t, exc)
                break
            if i == 0:
                for mode, res in (("tgdc", tgdc), ("gcd", gcd)):
                    with open(traces / f"bench_tick_{t}_{mode}.csv", "w", newline="", encoding="utf-8") as fh:
                        write_trace_csv(res, fh)
            for mode, res in (("tgdc", tgdc), ("gcd", gcd)):
                runs[mode].append(
                    {"seed": i, "iterations": res.iterations_used, "converged": res.converged,
                     "modularity": res.modularity}
                )
                all_runs[mode].append(res.iterations_used)
        per_tick[str(t)] = {
            mode: {"runs": r, "mean_iterations": _mean([x["iterations"] for x in r])} for mode, r in runs.items()
        }
    summary = {
        "ticks": per_tick,
        "tgdc_mean_iterations": _mean(all_runs["tgdc"]),
        "gcd_mean_iterations": _mean(all_runs["gcd"]),
        "lambda": settings["lambda"],
        "seeds": settings["seeds"],
    }
    with open(out / "bench.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(summary, sort_keys=True) + "\n")
    print(json.dumps({k: summary[k] for k in ("tgdc_mean_iterations", "gcd_mean_iterations")}, sort_keys=True))
    return EXIT_OK


def _mean(xs):
    return sum(xs) / len(xs) if xs else None


def sketch_stats(snapshot) -> dict:
    return {
        "tick": snapshot.tick,
        "total_mass": snapshot.edge_mass,
        "distinct_edge_estimate": snapshot.distinct_edge_estimate,
        "edge_fill_ratio": snapshot.edge_cms.fill_ratio(),
        "degree_fill_ratio": snapshot.degree_cms.fill_ratio(),
        "collision_load": snapshot.distinct_edge_estimate / snapshot.edge_cms.width,
        "tracked_nodes": len(snapshot.nodes()),
        "dropped_pairs": snapshot.dropped_pairs,
        "error_bound": modularity_error_bound(snapshot),
    }


def cmd_sketch_stats(args, settings: Settings) -> int:
    stream, code = _load(args, settings)
    if code == EXIT_NO_EVENTS:
        zeros = {"tick": None, "total_mass": 0, "distinct_edge_estimate": 0, "edge_fill_ratio": 0.0,
                 "degree_fill_ratio": 0.0, "collision_load": 0.0, "tracked_nodes": 0, "dropped_pairs": 0,
                 "error_bound": 0.0}
        print(json.dumps(zeros, sort_keys=True))
        return EXIT_OK
    if stream is None:
        return code
    sketch = settings.sketch_config()
    prev = None
    for t in stream.ticks:
        events = stream.events_by_tick[t]
        if settings["accumulate"] and prev is not None:
            builder = SnapshotBuilder.continuing(prev, t)
            builder.ingest_many([e.src for e in events], [e.dst for e in events])
            snapshot = builder.seal()
        else:
            snapshot = _fresh_snapshot(t, events, sketch)
        prev = snapshot
        print(json.dumps(sketch_stats(snapshot), sort_keys=True))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "eval": cmd_eval, "bench": cmd_bench, "sketch-stats": cmd_sketch_stats}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densewatch", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "detect dense communities and write per-tick reports",
        "eval": "run and score flagged events against labels",
        "bench": "compare convergence with and without retention",
        "sketch-stats": "print sketch statistics per tick",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("stream", help="CSV file of src,dst,timestamp[,label] lines")
        p.add_argument("--config", help="flat key = value settings file (flags win)")
        p.add_argument("--out", default="densewatch_out", help="output directory (default: %(default)s)")
        p.add_argument("--save-state", action="store_true", help="also write each tick's serialized sketch state")
        for key, (kind, default, text_) in OPTIONS.items():
            p.add_argument(f"--{key}", dest=key.replace("-", "_"), type=kind, default=None,
                           help=f"{text_} (default: {default if default is not None else 'env or 0'})")
        for key, text_ in FLAGS.items():
            p.add_argument(f"--{key}", dest=key.replace("-", "_"), action="store_const", const=True, default=None,
                           help=f"{text_} (default: off)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve_settings(args)
        settings.engine_config()
        SnapshotBuilder(0, settings.sketch_config())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_UNREADABLE
    except (ConfigError, ParameterError, ValueError) as exc:
        parser.error(str(exc))
    return COMMANDS[args.command](args, settings)


if __name__ == "__main__":
    sys.exit(main())
