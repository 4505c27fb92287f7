"""Per-tick ingestion of an edge stream into constant-space state.

A :class:`SnapshotBuilder` absorbs the events of one tick into two count-min
sketches (edge multiplicities and node degrees), a frequent-items sketch over
node appearances, and a bounded adjacency among tracked nodes.
:meth:`SnapshotBuilder.seal` freezes that state into a :class:`TickSnapshot`,
which is what the community game reads.

Edges are treated as undirected for all estimates: ``(u, v)`` and ``(v, u)``
share one canonical key.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .sketches import MASK64, CountMinSketch, FrequentItemsSketch, fmix64, fmix64_array

_PAIR_SALT = 0x2545F4914F6CDD1D
_PAIR_MULT = 0x9E3779B97F4A7C15
_DEGREE_SEED_SALT = 0xD1B54A32D192ED03

NORMAL = 0
ANOMALOUS = 1


class StateError(RuntimeError):
    """Write to a sealed builder, double seal, or tick mismatch."""


@dataclass(frozen=True)
class EdgeEvent:
    """One timestamped edge occurrence. ``label`` is evaluation-only."""

    src: int
    dst: int
    tick: int = 0
    label: Optional[int] = None


def node_id(name: str) -> int:
    """Stable 64-bit identifier for an arbitrary node label."""
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "little")


def canonical_edge_key(u: int, v: int) -> int:
    """Order-independent 64-bit key for the undirected pair ``{u, v}``."""
    lo, hi = (u, v) if u <= v else (v, u)
    return fmix64(fmix64(lo ^ _PAIR_SALT) ^ ((hi * _PAIR_MULT) & MASK64))


def canonical_edge_keys(src, dst) -> np.ndarray:
    """Vectorized :func:`canonical_edge_key`."""
    src = np.asarray(src, dtype=np.uint64)
    dst = np.asarray(dst, dtype=np.uint64)
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    return fmix64_array(fmix64_array(lo ^ np.uint64(_PAIR_SALT)) ^ (hi * np.uint64(_PAIR_MULT)))


@dataclass(frozen=True)
class SketchConfig:
    """Dimensions of the per-tick state. Defaults: 719 x 2 count-min
    sketches and a 4096-entry node summary."""

    cms_width: int = 719
    cms_depth: int = 2
    fi_capacity: int = 4096
    seed: int = 0
    max_tracked_pairs: Optional[int] = None
    threshold_mode: str = "mean"
    accumulate: bool = False

    @property
    def pair_capacity(self) -> int:
        if self.max_tracked_pairs is not None:
            return self.max_tracked_pairs
        return 8 * self.fi_capacity

    @property
    def edge_seed(self) -> int:
        return self.seed & MASK64

    @property
    def degree_seed(self) -> int:
        return (self.seed ^ _DEGREE_SEED_SALT) & MASK64


class SnapshotBuilder:
    """Single-writer accumulator for one tick."""

    def __init__(self, tick: int = 0, config: SketchConfig | None = None):
        self.tick = tick
        self.config = config or SketchConfig()
        cfg = self.config
        self.edge_cms = CountMinSketch(cfg.cms_width, cfg.cms_depth, cfg.edge_seed)
        self.degree_cms = CountMinSketch(cfg.cms_width, cfg.cms_depth, cfg.degree_seed)
        self.node_sketch = FrequentItemsSketch(cfg.fi_capacity, cfg.threshold_mode)
        self.edge_mass = 0
        self.distinct_edge_estimate = 0
        # pairs refused because the pair table was full of live pairs
        self.dropped_pairs = 0
        self._adj: dict[int, set[int]] = {}
        self._pair_count = 0
        self._stale = False
        self._sealed = False

    @classmethod
    def continuing(cls, snapshot: "TickSnapshot", tick: int) -> "SnapshotBuilder":
        """Builder for ``tick`` that starts from ``snapshot``'s accumulated state."""
        builder = cls(tick, snapshot.config)
        builder.edge_cms = snapshot.edge_cms.copy()
        builder.degree_cms = snapshot.degree_cms.copy()
        builder.node_sketch = snapshot.node_sketch.copy()
        builder.edge_mass = snapshot.edge_mass
        builder.distinct_edge_estimate = snapshot.distinct_edge_estimate
        for u, nbrs in snapshot._adj.items():
            builder._adj[u] = set(nbrs)
        builder._pair_count = snapshot._pair_count
        for arr in (builder.edge_cms.counters, builder.degree_cms.counters):
            arr.flags.writeable = True
        return builder

    @property
    def sealed(self) -> bool:
        return self._sealed

    def _check_open(self) -> None:
        if self._sealed:
            raise StateError("snapshot builder is sealed")

    def ingest(self, event: EdgeEvent) -> None:
        self._check_open()
        if event.tick != self.tick:
            raise StateError(f"event tick {event.tick} does not match builder tick {self.tick}")
        self.ingest_edge(event.src, event.dst)

    def ingest_edge(self, u: int, v: int) -> None:
        self._check_open()
        self.edge_cms.update(canonical_edge_key(u, v), 1)
        self.degree_cms.update(u, 1)
        self.degree_cms.update(v, 1)
        self.edge_mass += 1
        self._track(u, v)

    def ingest_many(self, src, dst) -> None:
        """Batch form of :meth:`ingest_edge`; same final state as a loop."""
        self._check_open()
        src = np.asarray(src, dtype=np.uint64).ravel()
        dst = np.asarray(dst, dtype=np.uint64).ravel()
        if src.shape != dst.shape:
            raise ValueError("src and dst must have equal length")
        if src.size == 0:
            return
        self.edge_cms.update_many(canonical_edge_keys(src, dst))
        self.degree_cms.update_many(np.concatenate([src, dst]))
        self.edge_mass += int(src.size)
        for u, v in zip(src.tolist(), dst.tolist()):
            self._track(u, v)

    def ingest_events(self, events: Iterable[EdgeEvent]) -> None:
        events = list(events)
        for ev in events:
            if ev.tick != self.tick:
                raise StateError(f"event tick {ev.tick} does not match builder tick {self.tick}")
        self.ingest_many([e.src for e in events], [e.dst for e in events])

    def _track(self, u: int, v: int) -> None:
        fi = self.node_sketch
        if fi.update(u, 1) is not None:
            self._stale = True
        if fi.update(v, 1) is not None:
            self._stale = True
        if u in fi and v in fi:
            self._add_pair(u, v)

    def _add_pair(self, u: int, v: int) -> None:
        nbrs = self._adj.get(u)
        if nbrs is not None and v in nbrs:
            return
        if self._pair_count >= self.config.pair_capacity:
            if self._stale:
                self._compact()
            if self._pair_count >= self.config.pair_capacity:
                self.dropped_pairs += 1
                return
        self._adj.setdefault(u, set()).add(v)
        self._adj.setdefault(v, set()).add(u)
        self._pair_count += 1
        self.distinct_edge_estimate += 1

    def _compact(self) -> None:
        """Drop pairs touching nodes no longer in the frequent-items sketch."""
        fi = self.node_sketch
        adj = {}
        count = 0
        for u, nbrs in self._adj.items():
            if u not in fi:
                continue
            kept = {v for v in nbrs if v in fi}
            if kept:
                adj[u] = kept
                count += sum(1 for v in kept if v >= u)
        self._adj = adj
        self._pair_count = count
        self._stale = False

    def seal(self) -> "TickSnapshot":
        self._check_open()
        self._compact()
        self._sealed = True
        return TickSnapshot(self)


class TickSnapshot:
    """Immutable summary of one tick.

    Implements the graph interface used by the modularity and game code:
    ``nodes()``, ``edge_mass``, ``degree(u)``, ``neighbor_weights(u)``,
    ``self_loops(u)`` and ``edge_weight(u, v)``. Edge weights are only
    materialized between tracked neighbours; every other pair reads as 0 in
    the modularity sums.
    """

    sealed = True

    def __init__(self, builder: SnapshotBuilder):
        self.tick = builder.tick
        self.config = builder.config
        self.edge_cms = builder.edge_cms
        self.degree_cms = builder.degree_cms
        self.node_sketch = builder.node_sketch
        self.edge_mass = builder.edge_mass
        self.distinct_edge_estimate = builder.distinct_edge_estimate
        self.dropped_pairs = builder.dropped_pairs
        self._adj = builder._adj
        self._pair_count = builder._pair_count
        for arr in (self.edge_cms.counters, self.degree_cms.counters):
            arr.flags.writeable = False

        tracked = [k for k, _ in self.node_sketch.frequent_items(0.0)]
        self._tracked = tracked
        if tracked:
            degs = self.degree_cms.query_many(np.array(tracked, dtype=np.uint64))
            self._degree = dict(zip(tracked, (int(d) for d in degs)))
        else:
            self._degree = {}

        pairs = [(u, v) for u, nbrs in self._adj.items() for v in nbrs if u <= v]
        self._nbr_w: dict[int, dict[int, int]] = {u: {} for u in tracked}
        self._loops: dict[int, int] = {}
        if pairs:
            keys = canonical_edge_keys([p[0] for p in pairs], [p[1] for p in pairs])
            weights = self.edge_cms.query_many(keys).tolist()
            for (u, v), w in zip(pairs, weights):
                if u == v:
                    self._loops[u] = w
                else:
                    self._nbr_w[u][v] = w
                    self._nbr_w[v][u] = w

    # -- graph interface ------------------------------------------------------

    def nodes(self) -> list[int]:
        """All tracked nodes, heaviest first (ties by ascending id)."""
        return list(self._tracked)

    def tracked_nodes(self, threshold: float = 0.0) -> list[int]:
        return [k for k, _ in self.node_sketch.frequent_items(threshold)]

    def degree(self, u: int) -> int:
        d = self._degree.get(u)
        return d if d is not None else self.degree_cms.query(u)

    def edge_weight(self, u: int, v: int) -> int:
        return self.edge_cms.query(canonical_edge_key(u, v))

    def neighbor_weights(self, u: int) -> dict[int, int]:
        return self._nbr_w.get(u, {})

    def neighbors(self, u: int) -> set[int]:
        return set(self._nbr_w.get(u, ()))

    def self_loops(self, u: int) -> int:
        return self._loops.get(u, 0)

    def tracked_pairs(self) -> Iterator[tuple[int, int]]:
        for u, nbrs in self._adj.items():
            for v in nbrs:
                if u <= v:
                    yield u, v

    @property
    def distinct_edges(self) -> int:
        return self.distinct_edge_estimate

    # -- serialization ----------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Fixed-size encoding; the length depends only on the sketch config."""
        cfg = self.config
        head = struct.pack(
            "<qQQQQ", self.tick, self.edge_mass, self.distinct_edge_estimate, cfg.pair_capacity, self._pair_count
        )
        table = np.zeros((cfg.pair_capacity, 2), dtype="<u8")
        pairs = sorted(self.tracked_pairs())
        if pairs:
            table[: len(pairs)] = pairs
        return b"".join(
            [head, self.edge_cms.to_bytes(), self.degree_cms.to_bytes(), self.node_sketch.to_bytes(), table.tobytes()]
        )

    def __repr__(self) -> str:
        return (
            f"TickSnapshot(tick={self.tick}, edge_mass={self.edge_mass}, "
            f"tracked={len(self._tracked)}, pairs={self._pair_count})"
        )


def build_snapshot(edges, tick: int = 0, config: SketchConfig | None = None) -> TickSnapshot:
    """Convenience: ingest ``(u, v)`` pairs into a fresh builder and seal it."""
    builder = SnapshotBuilder(tick, config)
    edges = list(edges)
    if edges:
        builder.ingest_many([e[0] for e in edges], [e[1] for e in edges])
    return builder.seal()
