"""Reading edge streams from disk.

The input format is UTF-8 CSV with one event per line::

    src,dst,timestamp[,label]

``src``/``dst`` are arbitrary strings, hashed to 64-bit node ids.
``timestamp`` is a number of seconds or an ISO-8601 string; events are
bucketed into ticks of ``tick_width`` timestamp units. ``label`` is 0
(normal) or 1 (anomalous). A first line whose timestamp does not parse is
taken as a header. Other unparseable lines are counted and skipped.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .snapshot import EdgeEvent, node_id


def parse_timestamp(text: str) -> float:
    """Seconds as a float; ISO-8601 strings become epoch seconds (naive = UTC)."""
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.timestamp()
    if not math.isfinite(value):
        raise ValueError(f"non-finite timestamp {text!r}")
    return value


def tick_of(timestamp: float, tick_width: float) -> int:
    return math.floor(timestamp / tick_width)


@dataclass
class LoadedStream:
    events_by_tick: dict[int, list[EdgeEvent]] = field(default_factory=dict)
    names: dict[int, str] = field(default_factory=dict)
    malformed: int = 0
    unlabelled: int = 0
    bad_labels: int = 0
    header: bool = False

    @property
    def event_count(self) -> int:
        return sum(len(v) for v in self.events_by_tick.values())

    @property
    def ticks(self) -> list[int]:
        return sorted(self.events_by_tick)

    @property
    def fully_labelled(self) -> bool:
        return self.event_count > 0 and self.unlabelled == 0 and self.bad_labels == 0

    def name(self, node: int) -> str:
        return self.names.get(node, str(node))


def load_stream(path, tick_width: float = 1.0) -> LoadedStream:
    """Parse a stream file; raises ``OSError`` when it cannot be read."""
    if not tick_width > 0:
        raise ValueError("tick_width must be positive")
    out = LoadedStream()
    by_tick: dict[int, list[EdgeEvent]] = defaultdict(list)
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) not in (3, 4) or not row[0].strip() or not row[1].strip():
                out.malformed += 1
                continue
            src, dst = row[0].strip(), row[1].strip()
            try:
                ts = parse_timestamp(row[2])
            except ValueError:
                if lineno == 0:
                    out.header = True
                else:
                    out.malformed += 1
                continue
            label = None
            if len(row) == 4:
                text = row[3].strip()
                if text in ("0", "1"):
                    label = int(text)
                else:
                    out.bad_labels += 1
            else:
                out.unlabelled += 1
            u, v = node_id(src), node_id(dst)
            out.names.setdefault(u, src)
            out.names.setdefault(v, dst)
            tick = tick_of(ts, tick_width)
            by_tick[tick].append(EdgeEvent(u, v, tick, label))
    out.events_by_tick = dict(sorted(by_tick.items()))
    return out
