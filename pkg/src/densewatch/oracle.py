"""Unbounded-memory reference implementations.

These keep every edge exactly and are meant for tests and for measuring how
far the sketch estimates drift from the truth.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional

from .modularity import (
    DegenerateInputError,
    Partition,
    approx_modularity,
    exact_modularity,
    modularity_error_bound,
)


class ExactGraph:
    """Undirected multigraph with exact multiplicities.

    Offers the same graph interface as a sealed snapshot, so every modularity
    and game function can run on it directly.
    """

    def __init__(self):
        self._adj: dict[int, dict[int, int]] = {}
        self._loops: dict[int, int] = defaultdict(int)
        self._degree: dict[int, int] = defaultdict(int)
        self.edge_mass = 0

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]]) -> "ExactGraph":
        g = cls()
        for u, v in edges:
            g.add_edge(u, v)
        return g

    def add_edge(self, u: int, v: int, count: int = 1) -> None:
        self._adj.setdefault(u, {})
        self._adj.setdefault(v, {})
        if u == v:
            self._loops[u] += count
        else:
            self._adj[u][v] = self._adj[u].get(v, 0) + count
            self._adj[v][u] = self._adj[v].get(u, 0) + count
        self._degree[u] += count
        self._degree[v] += count
        self.edge_mass += count

    def nodes(self) -> list[int]:
        return sorted(self._adj)

    def degree(self, u: int) -> int:
        return self._degree.get(u, 0)

    def neighbor_weights(self, u: int) -> dict[int, int]:
        return self._adj.get(u, {})

    def self_loops(self, u: int) -> int:
        return self._loops.get(u, 0)

    def edge_weight(self, u: int, v: int) -> int:
        if u == v:
            return self.self_loops(u)
        return self._adj.get(u, {}).get(v, 0)

    @property
    def distinct_edges(self) -> int:
        pairs = sum(len(n) for n in self._adj.values()) // 2
        return pairs + sum(1 for c in self._loops.values() if c > 0)

    def edges(self) -> list[tuple[int, int, int]]:
        """``(u, v, multiplicity)`` with ``u <= v``, sorted."""
        out = [(u, v, w) for u, nbrs in self._adj.items() for v, w in nbrs.items() if u < v]
        out += [(u, u, c) for u, c in self._loops.items() if c > 0]
        return sorted(out)

    def __repr__(self) -> str:
        return f"ExactGraph(nodes={len(self._adj)}, edge_mass={self.edge_mass})"


def exact_replay(events) -> ExactGraph:
    """Exact undirected multigraph of an event list (``EdgeEvent`` or pairs)."""
    g = ExactGraph()
    for ev in events:
        if hasattr(ev, "src"):
            g.add_edge(ev.src, ev.dst)
        else:
            g.add_edge(ev[0], ev[1])
    return g


@dataclass(frozen=True)
class ModularityComparison:
    exact: float
    approx: float
    relative_error: float
    bound: float
    bound_satisfied: bool


def compare_modularity(
    exact_graph: ExactGraph,
    snapshot,
    partition: Partition,
    epsilon_e: Optional[float] = None,
    phi_avg: float = 0.0,
    gamma: float = 1.0,
) -> ModularityComparison:
    """Exact vs. estimated modularity of one partition.

    Graph nodes the partition does not cover (nodes the sketch dropped) are
    scored as singletons on the exact side.
    """
    if exact_graph.edge_mass <= 0:
        raise DegenerateInputError("empty graph")
    assignment = partition.assignment
    label = max(assignment.values(), default=-1) + 1
    for u in exact_graph.nodes():
        if u not in assignment:
            assignment[u] = label
            label += 1
    q = exact_modularity(exact_graph, Partition(assignment), gamma)
    q_hat = approx_modularity(snapshot, partition, gamma)
    bound = modularity_error_bound(snapshot, epsilon_e, phi_avg)
    rel = abs(q_hat - q) / max(abs(q), 1e-12)
    return ModularityComparison(q, q_hat, rel, bound, q_hat <= q + bound + 1e-12)


def set_partitions(n: int):
    """All set partitions of ``range(n)`` as restricted growth strings."""
    if n == 0:
        yield []
        return
    rgs = [0] * n
    maxes = [0] * n

    def rec(i):
        if i == n:
            yield list(rgs)
            return
        for c in range(maxes[i - 1] + 2):
            rgs[i] = c
            maxes[i] = max(maxes[i - 1], c)
            yield from rec(i + 1)

    rgs[0] = 0
    yield from rec(1)


def brute_force_best_partition(graph: ExactGraph, max_nodes: int = 10) -> tuple[Partition, float]:
    """Exhaustive modularity maximizer for graphs of at most 10 nodes.

    Ties keep the first partition in restricted-growth order, which favours
    fewer, earlier-labelled communities.
    """
    nodes = graph.nodes()
    n = len(nodes)
    if n > max_nodes:
        raise ValueError(f"brute force is limited to {max_nodes} nodes, got {n}")
    m = graph.edge_mass
    if m <= 0:
        raise DegenerateInputError("modularity is undefined for a graph without edges")
    index = {u: i for i, u in enumerate(nodes)}
    deg = [graph.degree(u) for u in nodes]
    loops = [graph.self_loops(u) for u in nodes]
    pairs = [(index[u], index[v], w) for u, v, w in graph.edges() if u != v]

    best_q = float("-inf")
    best = None
    for rgs in set_partitions(n):
        k = max(rgs) + 1
        win = [0] * k
        dsum = [0] * k
        for i in range(n):
            win[rgs[i]] += loops[i]
            dsum[rgs[i]] += deg[i]
        for i, j, w in pairs:
            if rgs[i] == rgs[j]:
                win[rgs[i]] += w
        q = sum(win[c] / m - (dsum[c] / (2.0 * m)) ** 2 for c in range(k))
        if q > best_q + 1e-12:
            best_q = q
            best = rgs
    return Partition({u: best[index[u]] for u in nodes}), best_q
