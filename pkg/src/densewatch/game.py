"""Agent utilities for the community game.

Each tracked node is an agent. Its utility for ending up in community ``C``
mixes two terms with the retention rate ``lam``::

    utility = lam * payoff(i, C) + (1 - lam) * retention(C + {i})

``payoff`` is the node's modularity gain from sitting with the members of
``C``; ``retention`` scores the community's pull on its external neighbours
minus their push (how much degree each neighbour has elsewhere).

The sampler that picks which agent moves next lives here too: it starts
uniform and multiplies a node's weight by ``lam`` every time the node
switches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .modularity import ContractError, DegenerateInputError, Partition, PartitionDelta

RETENTION_VARIANTS = ("eq6", "example")

# relative slack for "strictly better"; guards ties against float noise
_TIE_RTOL = 1e-12


class ParameterError(ValueError):
    """Out-of-range numeric parameter."""


@dataclass(frozen=True)
class UtilityBreakdown:
    payoff_utility: float
    retention: Optional[float]
    lam: float
    combined: float


def _edge_mass(graph) -> int:
    m = graph.edge_mass
    if m <= 0:
        raise DegenerateInputError("utilities are undefined for a graph without edges")
    return m


# -- payoff ----------------------------------------------------------------------


def payoff_for_members(graph, node: int, members: Iterable[int], gamma: float = 1.0) -> float:
    """``sum_{j in members, j != node} (A_ij - gamma * k_i * k_j / 2m)``."""
    m = _edge_mass(graph)
    k_i = graph.degree(node)
    nbrs = graph.neighbor_weights(node)
    observed = 0
    deg = 0
    for j in members:
        if j == node:
            continue
        observed += nbrs.get(j, 0)
        deg += graph.degree(j)
    return observed - gamma * k_i * deg / (2.0 * m)


def marginal_payoff(graph, partition: Partition, node: int, label: Optional[int], gamma: float = 1.0) -> float:
    """Payoff of ``node`` for joining community ``label``.

    ``node``'s own membership is excluded from the sum; ``label=None`` is the
    empty community and yields 0.
    """
    m = _edge_mass(graph)
    if label is None:
        return 0.0
    k_i = graph.degree(node)
    observed = partition.links(label).get(node, 0)
    deg = partition.degree_sum(label)
    if partition[node] == label:
        deg -= k_i
    return observed - gamma * k_i * deg / (2.0 * m)


def pairwise_payoff(graph, partition: Partition, u: int, v: int, label: Optional[int], gamma: float = 1.0) -> float:
    """``q(u, v, C) = payoff(u, C + {v}) - payoff(u, C - {v})``."""
    members = set(partition.members(label)) if label is not None else set()
    return payoff_for_members(graph, u, members | {v}, gamma) - payoff_for_members(graph, u, members - {v}, gamma)


# -- retention -------------------------------------------------------------------


def retention_from_terms(terms: Iterable[tuple[int, int]], edge_mass: int, variant: str = "eq6") -> float:
    """Retention from ``(a, d_ext)`` pairs, one per external neighbour.

    ``a`` is the edge mass between the community and the neighbour, ``d_ext``
    the neighbour's degree outside the community.

    * ``"eq6"``: ``sum(a - d_ext / 2m)``
    * ``"example"``: ``sum(a - a * d_ext / 2m)`` -- each degree weighted by its
      edge count, which is how the worked demonstration values come out.
    """
    if edge_mass <= 0:
        raise DegenerateInputError("retention is undefined for a graph without edges")
    two_m = 2 * edge_mass
    pull = 0
    push = 0
    if variant == "eq6":
        for a, d_ext in terms:
            pull += a
            push += d_ext
    elif variant == "example":
        for a, d_ext in terms:
            pull += a
            push += a * d_ext
    else:
        raise ParameterError(f"unknown retention variant {variant!r}")
    return (two_m * pull - push) / two_m


def _external_terms(graph, links: dict[int, int], inside, exclude=()) -> list[tuple[int, int]]:
    terms = []
    for v, a in links.items():
        if a <= 0 or v in inside or v in exclude:
            continue
        terms.append((a, graph.degree(v) - a))
    return terms


def community_retention(
    graph, partition: Partition, label: int, variant: str = "eq6", exclude: Iterable[int] = ()
) -> float:
    """Retention of community ``label`` as it currently stands.

    External neighbours are partition nodes outside the community adjacent to
    at least one member; nodes in ``exclude`` are left out of that set.
    """
    m = _edge_mass(graph)
    members = partition.members(label)
    terms = _external_terms(graph, partition.links(label), members, set(exclude))
    return retention_from_terms(terms, m, variant)


def retention_if_joined(graph, partition: Partition, node: int, label: Optional[int], variant: str = "eq6") -> float:
    """Retention of ``C + {node}`` where ``C`` is community ``label``
    (``None`` = a fresh singleton), everyone else staying put."""
    m = _edge_mass(graph)
    nbrs = partition.node_neighbors(node)
    if label is None:
        return retention_from_terms([(a, graph.degree(v) - a) for v, a in nbrs.items()], m, variant)
    members = partition.members(label)
    if node in members:
        return community_retention(graph, partition, label, variant)
    links = dict(partition.links(label))
    for v, w in nbrs.items():
        links[v] = links.get(v, 0) + w
    terms = _external_terms(graph, links, members, (node,))
    return retention_from_terms(terms, m, variant)


# -- combined utility and strategy -------------------------------------------------


def combined_utility(payoff: float, retention: Optional[float], lam: float) -> UtilityBreakdown:
    """``lam * payoff + (1 - lam) * retention``.

    At ``lam == 1`` the retention term drops out and may be passed as ``None``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"lambda must lie in [0, 1], got {lam!r}")
    if retention is None:
        if lam != 1.0:
            raise ParameterError("retention is required when lambda < 1")
        return UtilityBreakdown(payoff, None, lam, payoff)
    return UtilityBreakdown(payoff, retention, lam, lam * payoff + (1.0 - lam) * retention)


def candidate_utilities(
    graph,
    partition: Partition,
    node: int,
    lam: float = 0.8,
    gamma: float = 1.0,
    retention_variant: str = "eq6",
) -> tuple[UtilityBreakdown, list[tuple[int, UtilityBreakdown]]]:
    """Utility of staying and of every candidate move.

    Candidates are the communities of ``node``'s neighbours (ascending label)
    followed by leaving for a fresh singleton when ``node`` is not already
    alone. Returns ``(stay, [(target_label, utility), ...])``.
    """
    if node not in partition:
        raise ContractError(f"node {node} is not tracked")
    own = partition[node]
    with_retention = lam != 1.0

    def evaluate(label: Optional[int]) -> UtilityBreakdown:
        payoff = marginal_payoff(graph, partition, node, label, gamma)
        retention = retention_if_joined(graph, partition, node, label, retention_variant) if with_retention else None
        return combined_utility(payoff, retention, lam)

    stay = evaluate(own)
    targets = sorted({partition[v] for v in partition.node_neighbors(node)} - {own})
    options = [(label, evaluate(label)) for label in targets]
    if len(partition.members(own)) > 1:
        options.append((partition.fresh_label(), evaluate(None)))
    return stay, options


def strictly_better(candidate: float, incumbent: float) -> bool:
    return candidate > incumbent + _TIE_RTOL * max(1.0, abs(incumbent))


def best_strategy(
    graph,
    partition: Partition,
    node: int,
    lam: float = 0.8,
    gamma: float = 1.0,
    retention_variant: str = "eq6",
) -> Optional[PartitionDelta]:
    """Best response of ``node``: a :class:`PartitionDelta`, or ``None`` to stay.

    Staying wins ties; among equally good moves the lowest target label wins
    (a fresh singleton always has the highest label).
    """
    stay, options = candidate_utilities(graph, partition, node, lam, gamma, retention_variant)
    best_label = None
    best_value = stay.combined
    for label, util in options:
        if strictly_better(util.combined, best_value):
            best_label, best_value = label, util.combined
    if best_label is None:
        return None
    return PartitionDelta(node, partition[node], best_label, best_value - stay.combined)


# -- sampling ----------------------------------------------------------------------


class SamplingDistribution:
    """Per-node sampling weights plus a seeded generator.

    The probability of node ``i`` is ``weight_i / sum(weights)``.
    """

    def __init__(self, nodes: Sequence[int], weights=None, seed: int = 0):
        self.nodes = list(nodes)
        if not self.nodes:
            raise ParameterError("sampling distribution needs at least one node")
        self.index = {u: i for i, u in enumerate(self.nodes)}
        if weights is None:
            self.weights = np.ones(len(self.nodes), dtype=np.float64)
        else:
            self.weights = np.asarray(weights, dtype=np.float64).copy()
            if self.weights.shape != (len(self.nodes),) or np.any(self.weights <= 0):
                raise ParameterError("weights must be positive, one per node")
        self.rng = np.random.default_rng(seed)
        self._cumsum = None

    def __len__(self) -> int:
        return len(self.nodes)

    def probability(self, node: int) -> float:
        return float(self.weights[self.index[node]] / self.weights.sum())

    def probabilities(self) -> dict[int, float]:
        p = self.weights / self.weights.sum()
        return dict(zip(self.nodes, p.tolist()))


def uniform_distribution(nodes: Sequence[int], seed: int = 0) -> SamplingDistribution:
    return SamplingDistribution(nodes, None, seed)


def sample_node(dist: SamplingDistribution) -> int:
    """Draw one node by inverting the cumulative weights."""
    if dist._cumsum is None:
        dist._cumsum = np.cumsum(dist.weights)
    cum = dist._cumsum
    r = dist.rng.random() * cum[-1]
    i = int(np.searchsorted(cum, r, side="right"))
    return dist.nodes[min(i, len(dist.nodes) - 1)]


def downweight(dist: SamplingDistribution, node: int, lam: float) -> SamplingDistribution:
    """Multiply ``node``'s weight by ``lam`` (compounds across calls)."""
    if not 0.0 < lam <= 1.0:
        raise ParameterError(f"lambda must lie in (0, 1], got {lam!r}")
    try:
        i = dist.index[node]
    except KeyError:
        raise ContractError(f"node {node} is not in the sampling distribution") from None
    if lam != 1.0:
        # stay strictly positive even after many compounded factors
        dist.weights[i] = max(dist.weights[i] * lam, np.finfo(np.float64).tiny)
        dist._cumsum = None
    return dist
