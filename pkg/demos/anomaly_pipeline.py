"""End to end: write a labelled stream, run the CLI evaluator, read the summary."""

import json
import sys
import tempfile
from pathlib import Path

from densewatch import cli
from densewatch.datasets import StreamSpec, planted_anomaly_stream, write_stream_csv


def main(ticks: int = 5):
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        stream = tmp / "stream.csv"
        write_stream_csv(planted_anomaly_stream(StreamSpec(ticks=ticks)), stream)
        code = cli.main(["eval", str(stream), "--out", str(tmp / "out")])
        summary = json.loads((tmp / "out" / "evaluation.json").read_text())
        first = (tmp / "out" / "reports.jsonl").read_text().splitlines()[0]
    print(f"exit code {code}")
    print(f"mean precision {summary['mean_precision']:.3f}, recall {summary['recall']:.3f}")
    print("first report:", first[:200], "...")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 5)
