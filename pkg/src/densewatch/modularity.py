"""Partition-quality math: modularity (exact and sketch-estimated),
per-community modularity, NMI and the sketch error bound.

All functions take a *graph* argument that provides ``nodes()``,
``edge_mass``, ``degree(u)``, ``neighbor_weights(u)`` and ``self_loops(u)``.
Both :class:`~densewatch.snapshot.TickSnapshot` (estimated counts) and
:class:`~densewatch.oracle.ExactGraph` (exact counts) qualify, so "exact" and
"approximate" modularity share one formula and differ only in their inputs.

Self-loops count twice on the adjacency diagonal (``A_ii = 2 * multiplicity``)
so that degrees always sum to twice the edge mass.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Optional

import numpy as np

log = logging.getLogger(__name__)


class DegenerateInputError(ValueError):
    """The graph has no edges, so modularity is undefined."""


class ContractError(ValueError):
    """Arguments violate a precondition (mismatched node sets, unknown node...)."""


@dataclass(frozen=True)
class PartitionDelta:
    node: int
    old_label: int
    new_label: int
    utility_gained: float

    def __post_init__(self):
        if self.old_label == self.new_label:
            raise ContractError("a delta must change the node's label")


class Partition:
    """Assignment of nodes to integer community labels.

    A partition may be *bound* to a graph, in which case it also maintains
    integer per-community aggregates that the game needs on every move:

    * ``internal_mass(c)`` -- edge mass with both ends in ``c`` (self-loops
      counted once), i.e. half the ordered-pair sum of ``A_ij``;
    * ``degree_sum(c)`` -- sum of member degrees;
    * ``links(c)`` -- node -> edge mass from members of ``c`` to that node
      (for nodes outside ``c`` this is the external neighbour map).

    Only neighbours that belong to the partition's node set are counted.
    """

    def __init__(self, assignment: Mapping[int, int], graph=None):
        self._assign: dict[int, int] = dict(assignment)
        self._members: dict[int, set[int]] = defaultdict(set)
        for node, label in self._assign.items():
            self._members[label].add(node)
        self._members = dict(self._members)
        self._next_label = max(self._members, default=-1) + 1
        self.graph = None
        if graph is not None:
            self.bind(graph)

    # -- construction ----------------------------------------------------------

    @classmethod
    def singletons(cls, nodes: Iterable[int], graph=None) -> "Partition":
        return cls({node: i for i, node in enumerate(nodes)}, graph)

    @classmethod
    def from_communities(cls, communities: Iterable[Iterable[int]], graph=None) -> "Partition":
        assignment = {}
        for label, members in enumerate(communities):
            for node in members:
                if node in assignment:
                    raise ContractError(f"node {node} appears in two communities")
                assignment[node] = label
        return cls(assignment, graph)

    def copy(self, graph=None) -> "Partition":
        p = Partition(self._assign, graph if graph is not None else self.graph)
        p._next_label = max(p._next_label, self._next_label)
        return p

    def bind(self, graph) -> "Partition":
        """Attach ``graph`` and (re)compute all aggregates from scratch."""
        self.graph = graph
        self._deg: dict[int, int] = {}
        self._win: dict[int, int] = {}
        self._links: dict[int, dict[int, int]] = {}
        self._nbrs: dict[int, dict[int, int]] = {}
        assign = self._assign
        for node in assign:
            self._nbrs[node] = {v: w for v, w in graph.neighbor_weights(node).items() if v in assign and w > 0}
        for label, members in self._members.items():
            self._deg[label] = sum(graph.degree(u) for u in members)
            links: dict[int, int] = defaultdict(int)
            win2 = 0
            for u in members:
                for v, w in self._nbrs[u].items():
                    links[v] += w
                    if assign[v] == label:
                        win2 += w
            self._links[label] = dict(links)
            self._win[label] = win2 // 2 + sum(graph.self_loops(u) for u in members)
        return self

    # -- queries -----------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._assign)

    def __contains__(self, node) -> bool:
        return node in self._assign

    def __getitem__(self, node: int) -> int:
        return self._assign[node]

    def label_of(self, node: int) -> int:
        try:
            return self._assign[node]
        except KeyError:
            raise ContractError(f"node {node} is not in the partition") from None

    @property
    def assignment(self) -> dict[int, int]:
        return dict(self._assign)

    @property
    def nodes(self) -> list[int]:
        return list(self._assign)

    @property
    def labels(self) -> list[int]:
        return sorted(self._members)

    @property
    def communities(self) -> dict[int, frozenset[int]]:
        return {label: frozenset(m) for label, m in self._members.items()}

    def has_community(self, label: int) -> bool:
        return label in self._members

    def members(self, label: int) -> set[int]:
        try:
            return self._members[label]
        except KeyError:
            raise ContractError(f"unknown community label {label}") from None

    def node_neighbors(self, node: int) -> dict[int, int]:
        """Neighbour weights of ``node`` restricted to the partition's nodes."""
        self._require_bound()
        return self._nbrs[node]

    def internal_mass(self, label: int) -> int:
        self._require_bound()
        self.members(label)
        return self._win[label]

    def degree_sum(self, label: int) -> int:
        self._require_bound()
        self.members(label)
        return self._deg[label]

    def links(self, label: int) -> dict[int, int]:
        self._require_bound()
        self.members(label)
        return self._links[label]

    def fresh_label(self) -> int:
        return self._next_label

    def _require_bound(self) -> None:
        if self.graph is None:
            raise ContractError("partition is not bound to a graph")

    # -- mutation ----------------------------------------------------------------

    def move(self, node: int, new_label: int) -> int:
        """Reassign ``node``; returns its old label. ``new_label`` may be fresh."""
        old = self.label_of(node)
        if new_label == old:
            return old
        bound = self.graph is not None
        if bound:
            nbrs = self._nbrs[node]
            k = self.graph.degree(node)
            loops = self.graph.self_loops(node)
            old_links = self._links[old]
            self._win[old] -= old_links.get(node, 0) + loops
            self._deg[old] -= k
            for v, w in nbrs.items():
                left = old_links[v] - w
                if left:
                    old_links[v] = left
                else:
                    del old_links[v]
        self._members[old].discard(node)
        if not self._members[old]:
            del self._members[old]
            if bound:
                del self._links[old], self._deg[old], self._win[old]
        self._assign[node] = new_label
        self._members.setdefault(new_label, set()).add(node)
        self._next_label = max(self._next_label, new_label + 1)
        if bound:
            new_links = self._links.setdefault(new_label, {})
            self._win[new_label] = self._win.get(new_label, 0) + new_links.get(node, 0) + loops
            self._deg[new_label] = self._deg.get(new_label, 0) + k
            for v, w in nbrs.items():
                new_links[v] = new_links.get(v, 0) + w
        return old

    def apply(self, delta: PartitionDelta) -> None:
        if self.label_of(delta.node) != delta.old_label:
            raise ContractError(f"node {delta.node} is not in community {delta.old_label}")
        self.move(delta.node, delta.new_label)

    def relabeled(self, mapping: Mapping[int, int]) -> "Partition":
        """Copy with community labels renamed through a bijection."""
        return Partition({n: mapping[c] for n, c in self._assign.items()}, self.graph)

    def canonical(self) -> frozenset[frozenset[int]]:
        """Label-free view, handy for equality checks."""
        return frozenset(frozenset(m) for m in self._members.values())

    def __repr__(self) -> str:
        return f"Partition(nodes={len(self._assign)}, communities={len(self._members)})"


# -- modularity ------------------------------------------------------------------


def _community_terms(graph, members: Iterable[int], inside: set) -> tuple[int, int]:
    """(internal edge mass, degree sum) of ``members`` computed from scratch."""
    win2 = 0
    loops = 0
    deg = 0
    for u in members:
        deg += graph.degree(u)
        loops += graph.self_loops(u)
        for v, w in graph.neighbor_weights(u).items():
            if v in inside:
                win2 += w
    return win2 // 2 + loops, deg


def _q_term(internal: float, degree_sum: float, m: float, gamma: float) -> float:
    return internal / m - gamma * (degree_sum / (2.0 * m)) ** 2


def _modularity(graph, partition: Partition, gamma: float) -> float:
    m = graph.edge_mass
    if m <= 0:
        raise DegenerateInputError("modularity is undefined for a graph without edges")
    total = 0.0
    for label in partition.labels:
        members = partition.members(label)
        win, deg = _community_terms(graph, members, members)
        total += _q_term(win, deg, m, gamma)
    return total


def exact_modularity(graph, partition: Partition, gamma: float = 1.0) -> float:
    """Newman modularity of ``partition`` on a graph with exact counts.

    ``partition`` must cover every node of ``graph``.
    """
    missing = [u for u in graph.nodes() if u not in partition]
    if missing:
        raise ContractError(f"partition does not cover {len(missing)} graph node(s)")
    return _modularity(graph, partition, gamma)


def approx_modularity(snapshot, partition: Partition, gamma: float = 1.0) -> float:
    """Modularity from sketch estimates, summed over the partition's nodes.

    The observed term uses estimated edge weights between tracked neighbours
    only; the null-model term runs over every within-community pair.
    """
    return _modularity(snapshot, partition, gamma)


def community_modularity(graph, partition: Partition, label: int, gamma: float = 1.0) -> float:
    """Contribution of one community: ``w_in / m - gamma * (d / 2m)**2``.

    Summing this over all labels reproduces :func:`approx_modularity`.
    """
    m = graph.edge_mass
    if m <= 0:
        raise DegenerateInputError("modularity is undefined for a graph without edges")
    members = partition.members(label)
    if partition.graph is graph:
        win, deg = partition.internal_mass(label), partition.degree_sum(label)
    else:
        win, deg = _community_terms(graph, members, members)
    return _q_term(win, deg, m, gamma)


def modularity_from_aggregates(partition: Partition, gamma: float = 1.0) -> float:
    """Modularity from a bound partition's maintained aggregates (fast path)."""
    m = partition.graph.edge_mass
    if m <= 0:
        raise DegenerateInputError("modularity is undefined for a graph without edges")
    return sum(_q_term(partition.internal_mass(c), partition.degree_sum(c), m, gamma) for c in partition.labels)


# -- NMI --------------------------------------------------------------------------


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(p1: Partition, p2: Partition) -> float:
    """Normalized mutual information ``2 I / (H1 + H2)`` (natural log).

    Returns 1.0 when both partitions are trivial (zero entropy each) and
    0.0 when exactly one is.
    """
    a1 = p1.assignment if isinstance(p1, Partition) else dict(p1)
    a2 = p2.assignment if isinstance(p2, Partition) else dict(p2)
    if a1.keys() != a2.keys():
        raise ContractError("partitions are defined over different node sets")
    n = len(a1)
    if n == 0:
        raise ContractError("partitions are empty")
    nodes = list(a1)
    _, x = np.unique(np.array([a1[u] for u in nodes]), return_inverse=True)
    _, y = np.unique(np.array([a2[u] for u in nodes]), return_inverse=True)
    h1 = _entropy(np.bincount(x), n)
    h2 = _entropy(np.bincount(y), n)
    if h1 == 0.0 and h2 == 0.0:
        return 1.0
    if h1 == 0.0 or h2 == 0.0:
        return 0.0
    joint = np.bincount(x * (y.max() + 1) + y)
    mutual = h1 + h2 - _entropy(joint, n)
    value = 2.0 * mutual / (h1 + h2)
    return min(max(value, 0.0), 1.0)


# -- error bound ------------------------------------------------------------------


def modularity_error_bound(snapshot, epsilon_e: Optional[float] = None, phi_avg: float = 0.0) -> float:
    """Additive slack ``V_u * (epsilon_e / 2 - phi_avg)`` on the estimated
    modularity, where ``V_u`` is the snapshot's distinct-edge estimate.

    ``epsilon_e`` defaults to ``e / width`` of the edge sketch. A negative
    slack is clamped to 0 and logged.
    """
    if epsilon_e is None:
        epsilon_e = math.e / snapshot.edge_cms.width
    bound = snapshot.distinct_edge_estimate * (epsilon_e / 2.0 - phi_avg)
    if bound < 0.0:
        log.warning("negative modularity slack %.6g clamped to 0 (phi_avg=%g > epsilon_e/2=%g)",
                    bound, phi_avg, epsilon_e / 2.0)
        return 0.0
    return bound
