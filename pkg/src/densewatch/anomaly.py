"""From terminal partitions to anomaly reports.

Communities are ranked by their own modularity contribution ``Q_c``; every
event of the tick whose endpoints both sit in one of the top-K communities is
flagged with that community's ``Q_c`` as its score.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .modularity import ContractError, Partition, community_modularity

DEFAULT_K = 10
DEFAULT_MIN_SIZE = 3


@dataclass(frozen=True)
class RankedCommunity:
    label: int
    q_c: float
    size: int
    internal_mass: int


@dataclass(frozen=True)
class FlaggedEdge:
    src: object
    dst: object
    score: float
    index: int  # position of the event within its tick


@dataclass
class AnomalyReport:
    tick: int
    top_communities: list[RankedCommunity]
    flagged_edges: list[FlaggedEdge]
    k: int = DEFAULT_K

    def to_json(self, name: Callable = lambda x: x) -> dict:
        return {
            "tick": self.tick,
            "top": [{"label": c.label, "q_c": c.q_c, "size": c.size} for c in self.top_communities],
            "flagged": [{"src": name(f.src), "dst": name(f.dst), "score": f.score} for f in self.flagged_edges],
        }


@dataclass
class EvaluationSummary:
    per_tick_precision: list[float] = field(default_factory=list)
    flagged_count: int = 0
    true_positive_count: int = 0
    anomalous_count: int = 0

    @property
    def mean_precision(self) -> Optional[float]:
        """Mean over ticks with at least one flag; ``None`` when there are none."""
        if not self.per_tick_precision:
            return None
        return sum(self.per_tick_precision) / len(self.per_tick_precision)

    @property
    def recall(self) -> Optional[float]:
        if self.anomalous_count == 0:
            return None
        return self.true_positive_count / self.anomalous_count

    def to_json(self) -> dict:
        mean = self.mean_precision
        rec = self.recall
        return {
            "summary": True,
            "mean_precision": mean if mean is not None else "not-applicable",
            "per_tick_precision": self.per_tick_precision,
            "flagged_count": self.flagged_count,
            "true_positive_count": self.true_positive_count,
            "recall": rec if rec is not None else "not-applicable",
        }


def dense_communities(
    snapshot, partition: Partition, k: int = DEFAULT_K, min_size: int = DEFAULT_MIN_SIZE, gamma: float = 1.0
) -> list[RankedCommunity]:
    """Top ``k`` communities of at least ``min_size`` members.

    Ordered by ``Q_c`` (descending), then internal edge mass (descending),
    then label (ascending).
    """
    if len(partition) == 0:
        raise ContractError("partition is empty")
    if k < 1:
        raise ContractError("k must be at least 1")
    if partition.graph is not snapshot:
        partition = partition.copy(snapshot)
    ranked = []
    for label, members in partition.communities.items():
        if len(members) < min_size:
            continue
        q_c = community_modularity(snapshot, partition, label, gamma)
        ranked.append(RankedCommunity(label, q_c, len(members), partition.internal_mass(label)))
    ranked.sort(key=lambda c: (-c.q_c, -c.internal_mass, c.label))
    return ranked[:k]


def score_edges(
    partition: Partition,
    top: Sequence[RankedCommunity],
    tick_events: Iterable,
    key: Callable = lambda x: x,
) -> list[FlaggedEdge]:
    """Flag events whose endpoints share one of the ``top`` communities.

    ``tick_events`` holds ``EdgeEvent`` objects or ``(src, dst)`` pairs;
    ``key`` maps an endpoint to its node id. Endpoints the partition does not
    cover are never flagged.
    """
    score = {c.label: c.q_c for c in top}
    flagged = []
    for i, ev in enumerate(tick_events):
        src, dst = (ev.src, ev.dst) if hasattr(ev, "src") else (ev[0], ev[1])
        u, v = key(src), key(dst)
        if u not in partition or v not in partition:
            continue
        c = partition[u]
        if c == partition[v] and c in score:
            flagged.append(FlaggedEdge(src, dst, score[c], i))
    return flagged


def evaluate(reports: Sequence[AnomalyReport], events_by_tick: dict) -> EvaluationSummary:
    """Precision of the flagged events against their labels, tick by tick."""
    summary = EvaluationSummary()
    for events in events_by_tick.values():
        for ev in events:
            if getattr(ev, "label", None) is None:
                raise ContractError("every event needs a label for evaluation")
            summary.anomalous_count += ev.label != 0
    for report in reports:
        if not report.flagged_edges:
            continue
        events = events_by_tick.get(report.tick)
        if events is None:
            raise ContractError(f"no events for tick {report.tick}")
        hits = sum(1 for f in report.flagged_edges if events[f.index].label != 0)
        summary.per_tick_precision.append(hits / len(report.flagged_edges))
        summary.flagged_count += len(report.flagged_edges)
        summary.true_positive_count += hits
    return summary


def write_reports(reports: Iterable[AnomalyReport], fh, name: Callable = lambda x: x, summary=None) -> None:
    """JSON lines, one per tick, optionally followed by the summary object."""
    for report in reports:
        fh.write(json.dumps(report.to_json(name), sort_keys=True) + "\n")
    if summary is not None:
        fh.write(json.dumps(summary.to_json(), sort_keys=True) + "\n")
