"""Bundled graphs and synthetic stream generators.

Everything here is deterministic given its seed.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .snapshot import ANOMALOUS, NORMAL, EdgeEvent

# Zachary's karate club, 34 members, 78 friendships (0-indexed).
KARATE_EDGES = [
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10), (0, 11), (0, 12),
    (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2), (1, 3), (1, 7), (1, 13), (1, 17),
    (1, 19), (1, 21), (1, 30), (2, 3), (2, 7), (2, 8), (2, 9), (2, 13), (2, 27), (2, 28),
    (2, 32), (3, 7), (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16), (6, 16),
    (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33), (15, 32), (15, 33),
    (18, 32), (18, 33), (19, 33), (20, 32), (20, 33), (22, 32), (22, 33), (23, 25), (23, 27),
    (23, 29), (23, 32), (23, 33), (24, 25), (24, 27), (24, 31), (25, 31), (26, 29), (26, 33),
    (27, 33), (28, 31), (28, 33), (29, 32), (29, 33), (30, 32), (30, 33), (31, 32), (31, 33),
    (32, 33),
]

TWO_TRIANGLES = [(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6)]


# -- small fixture suite -----------------------------------------------------------


def _cycle(nodes):
    return [(nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))]


def _clique(nodes):
    return list(itertools.combinations(nodes, 2))


def _random_graph(n: int, p: float, seed: int) -> list[tuple[int, int]]:
    rng = np.random.default_rng(seed)
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
    touched = {u for e in edges for u in e}
    # every node must show up in the stream
    for u in range(n):
        if u not in touched:
            v = int(rng.integers(n - 1))
            v = v + 1 if v >= u else v
            edges.append((min(u, v), max(u, v)))
    return edges


def small_fixtures() -> dict[str, list[tuple[int, int]]]:
    """Twenty small graphs (5-10 nodes) used for equilibrium and quality checks."""
    fx = {
        "two_triangles": TWO_TRIANGLES,
        "bridged_triangles": _clique([0, 1, 2]) + _clique([3, 4, 5]) + [(2, 3)],
        "barbell_4_4": _clique([0, 1, 2, 3]) + _clique([4, 5, 6, 7]) + [(3, 4)],
        "bridged_squares": _cycle([0, 1, 2, 3]) + _cycle([4, 5, 6, 7]) + [(0, 2), (4, 6), (3, 4)],
        "k4_and_triangle": _clique([0, 1, 2, 3]) + _clique([4, 5, 6]) + [(3, 4)],
        "path_6": [(i, i + 1) for i in range(5)],
        "cycle_8": _cycle(list(range(8))),
        "star_7": [(0, i) for i in range(1, 8)],
        "complete_6": _clique(list(range(6))),
        "house_with_tail": _cycle([0, 1, 2, 3]) + [(0, 4), (1, 4), (3, 5), (5, 6)],
        "heavy_triangles": [e for e in TWO_TRIANGLES for _ in range(2)] + [(3, 4)],
        "looped_triangles": _clique([0, 1, 2]) + _clique([3, 4, 5]) + [(2, 3), (0, 0), (5, 5)],
        "triangle_ring": _clique([0, 1, 2]) + _clique([3, 4, 5]) + _clique([6, 7, 8]) + [(2, 3), (5, 6), (8, 0)],
        "wheel_7": _cycle(list(range(1, 7))) + [(0, i) for i in range(1, 7)],
    }
    for i, n in enumerate((6, 7, 8, 8, 9, 10)):
        fx[f"random_{n}_{i}"] = _random_graph(n, 0.45, seed=i)
    return fx


# -- planted partitions -------------------------------------------------------------


def planted_partition(
    n_blocks: int = 4, block_size: int = 50, p_in: float = 0.2, p_out: float = 0.005, seed: int = 0
) -> tuple[list[tuple[int, int]], list[int]]:
    """Stochastic block model; returns ``(edges, block_of_node)``."""
    rng = np.random.default_rng(seed)
    n = n_blocks * block_size
    block = [i // block_size for i in range(n)]
    iu, ju = np.triu_indices(n, k=1)
    same = np.array(block)[iu] == np.array(block)[ju]
    prob = np.where(same, p_in, p_out)
    keep = rng.random(iu.size) < prob
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    return edges, block


# -- synthetic streams -----------------------------------------------------------------


@dataclass(frozen=True)
class StreamSpec:
    """Shape of the planted-anomaly stream.

    Each tick mixes sparse background traffic (single connections between
    random hosts) with a few dense anomalous blocks whose internal pairs
    repeat many times. A fraction ``stray_fraction`` of anomalous events
    leaves the block for a random host.
    """

    ticks: int = 20
    background_edges: int = 300
    host_pool: int = 3000
    blocks_per_tick: int = 2
    block_size: int = 8
    repeats: tuple[int, int] = (4, 12)
    stray_fraction: float = 0.05
    seed: int = 0


def planted_anomaly_stream(spec: StreamSpec = StreamSpec()) -> list[EdgeEvent]:
    """Labelled events, grouped by tick and shuffled within each tick."""
    rng = np.random.default_rng(spec.seed)
    events: list[EdgeEvent] = []
    for tick in range(spec.ticks):
        tick_events = []
        for _ in range(spec.background_edges):
            u, v = rng.choice(spec.host_pool, size=2, replace=False)
            tick_events.append(EdgeEvent(int(u), int(v), tick, NORMAL))
        # anomalous hosts come from a disjoint id range
        base = spec.host_pool + tick * spec.blocks_per_tick * spec.block_size
        for b in range(spec.blocks_per_tick):
            hosts = [base + b * spec.block_size + i for i in range(spec.block_size)]
            intra = []
            for u, v in itertools.combinations(hosts, 2):
                for _ in range(int(rng.integers(spec.repeats[0], spec.repeats[1] + 1))):
                    intra.append(EdgeEvent(u, v, tick, ANOMALOUS))
            n_stray = int(round(len(intra) * spec.stray_fraction / (1.0 - spec.stray_fraction)))
            for _ in range(n_stray):
                u = hosts[int(rng.integers(len(hosts)))]
                v = int(rng.integers(spec.host_pool))
                intra.append(EdgeEvent(u, v, tick, ANOMALOUS))
            tick_events.extend(intra)
        order = rng.permutation(len(tick_events))
        events.extend(tick_events[i] for i in order)
    return events


def write_stream_csv(events: Iterable[EdgeEvent], path, with_labels: bool = True, names=None) -> None:
    """Write events in the ``src,dst,timestamp[,label]`` input format."""
    name = names or str
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for ev in events:
            row = [name(ev.src), name(ev.dst), ev.tick]
            if with_labels:
                row.append(ev.label if ev.label is not None else NORMAL)
            writer.writerow(row)


# -- retention demonstration ---------------------------------------------------------------


def retention_demo_graphs() -> dict[str, dict]:
    """Two 14-node, 13-edge graphs realizing the retention demonstration.

    ``"c1"`` holds community ``{x1, x2, x3}`` with two external neighbours
    carrying 3 edges each and outside degrees 3 and 2. ``"c2"`` holds
    ``{y1, y2, y3}`` with external neighbours carrying (3 edges, outside
    degree 2) and (1 edge, outside degree 0). In both, node ``"b"`` is the
    deciding node and is left out of the external set.
    """
    c1_edges = (
        [(x, o) for x in ("x1", "x2", "x3") for o in ("o1", "o2")]
        + [("o1", "o2"), ("o1", "o2"), ("o1", "z")]
        + [("f1", "f2"), ("f3", "f4"), ("f5", "f6"), ("f7", "b")]
    )
    c2_edges = (
        [(y, "o3") for y in ("y1", "y2", "y3")]
        + [("o3", "g"), ("o3", "h"), ("y1", "leaf")]
        + [("b", "f1"), ("f1", "f2"), ("f2", "f3"), ("f3", "f4"), ("f4", "f5"), ("f5", "f6"), ("f1", "f3")]
    )
    return {
        "c1": {"edges": c1_edges, "community": ("x1", "x2", "x3"), "mover": "b"},
        "c2": {"edges": c2_edges, "community": ("y1", "y2", "y3"), "mover": "b"},
    }


# (edge mass to the community, outside degree) per external neighbour
RETENTION_DEMO_TERMS = {
    "c1": [(3, 3), (3, 2)],
    "c2": [(3, 2), (1, 0)],
}
RETENTION_DEMO_EDGE_MASS = 13


def flow_stream(
    ticks: int = 50,
    groups: int = 6,
    group_size: int = 20,
    flows_per_tick: int = 80,
    mean_repeats: float = 22.0,
    cross_fraction: float = 0.1,
    one_off: int = 20,
    seed: int = 0,
) -> list[EdgeEvent]:
    """Unlabelled traffic from a persistent host population.

    Hosts are split into ``groups``; every tick a set of flows (host pairs,
    mostly within a group) is drawn and each flow repeats a Poisson number of
    times, the way connection logs repeat the same conversations. A handful
    of one-off connections adds noise.
    """
    rng = np.random.default_rng(seed)
    n = groups * group_size
    events: list[EdgeEvent] = []
    for tick in range(ticks):
        tick_events = []
        for _ in range(flows_per_tick):
            u = int(rng.integers(n))
            if rng.random() < cross_fraction:
                v = int(rng.integers(n - 1))
                v = v + 1 if v >= u else v
            else:
                g = u // group_size
                v = g * group_size + int(rng.integers(group_size - 1))
                v = v + 1 if v >= u else v
            reps = 1 + int(rng.poisson(mean_repeats - 1))
            tick_events.extend(EdgeEvent(u, v, tick) for _ in range(reps))
        for _ in range(one_off):
            u, v = rng.choice(n, size=2, replace=False)
            tick_events.append(EdgeEvent(int(u), int(v), tick))
        order = rng.permutation(len(tick_events))
        events.extend(tick_events[i] for i in order)
    return events
