"""Per-tick driver for the community game.

:func:`run_tick` starts from singletons (or last tick's communities), then
repeatedly samples a node, lets it play its best response and, when it
switches, shrinks its sampling weight by ``lam``. Every window of iterations
the partition is compared with the one at the previous checkpoint; once the
NMI between them reaches ``eta`` and no node has an improving move, the tick
is done.

:func:`run_gcd` is the same loop with ``lam = 1`` and no down-weighting,
i.e. the plain best-response game without the retention term.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .game import (
    RETENTION_VARIANTS,
    ParameterError,
    best_strategy,
    candidate_utilities,
    downweight,
    sample_node,
    strictly_better,
    uniform_distribution,
)
from .modularity import (
    ContractError,
    DegenerateInputError,
    Partition,
    modularity_from_aggregates,
    nmi,
)

TRACE_HEADER = ("iteration", "modularity", "switches")


@dataclass(frozen=True)
class EngineConfig:
    """Knobs of the game loop.

    ``nmi_window=0`` means one window per tracked node count; ``max_iterations``
    of ``None`` means ``max_iterations_factor * n``.
    """

    lam: float = 0.8
    eta: float = 0.99
    nmi_window: int = 0
    max_iterations: Optional[int] = None
    max_iterations_factor: int = 50
    fi_threshold: float = 0.3
    gamma: float = 1.0
    retention_variant: str = "eq6"
    seed: int = 0
    carry_over_partition: bool = False
    downweight: bool = True
    require_equilibrium: bool = True

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"lam must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta}")
        if self.nmi_window < 0:
            raise ParameterError("nmi_window must be >= 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ParameterError("max_iterations must be positive")
        if self.max_iterations_factor < 1:
            raise ParameterError("max_iterations_factor must be positive")
        if not 0.0 <= self.fi_threshold <= 1.0:
            raise ParameterError("fi_threshold must lie in [0, 1]")
        if self.gamma <= 0:
            raise ParameterError("gamma must be positive")
        if self.retention_variant not in RETENTION_VARIANTS:
            raise ParameterError(f"retention_variant must be one of {RETENTION_VARIANTS}")


@dataclass
class TickResult:
    partition: Partition
    iterations_used: int
    modularity_trace: list[tuple[int, float, int]] = field(default_factory=list)
    switch_count: int = 0
    converged: bool = False
    nash_verified: Optional[bool] = None

    @property
    def modularity(self) -> float:
        return self.modularity_trace[-1][1]

    def trace_csv(self) -> str:
        buf = io.StringIO()
        write_trace_csv(self, buf)
        return buf.getvalue()


def write_trace_csv(result: TickResult, fh) -> None:
    """``iteration,modularity,switches`` rows, one per trace point."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for it, q, sw in result.modularity_trace:
        writer.writerow((it, repr(float(q)), sw))


def terminate_check(checkpoint, current, eta: float) -> bool:
    """True (stop) iff ``NMI(checkpoint, current) >= eta``."""
    return nmi(checkpoint, current) >= eta


def is_nash_equilibrium(
    graph,
    partition: Partition,
    lam: float = 1.0,
    gamma: float = 1.0,
    retention_variant: str = "eq6",
) -> tuple[bool, list[int]]:
    """Whether no node can strictly improve its utility with one move.

    Uses the same candidate set and utility as :func:`best_strategy`.
    Returns ``(ok, violating_nodes)``.
    """
    if partition.graph is not graph:
        partition = partition.copy(graph)
    violators = []
    for node in partition.nodes:
        stay, options = candidate_utilities(graph, partition, node, lam, gamma, retention_variant)
        if any(strictly_better(u.combined, stay.combined) for _, u in options):
            violators.append(node)
    return not violators, violators


def _game_nodes(graph, threshold: float) -> list[int]:
    if hasattr(graph, "tracked_nodes"):
        return graph.tracked_nodes(threshold)
    return list(graph.nodes())


def initial_partition(graph, nodes: list[int], prev: Optional[Partition]) -> Partition:
    """Previous labels for surviving nodes; fresh singletons for the rest."""
    if prev is None:
        return Partition.singletons(nodes, graph)
    assignment = {u: prev[u] for u in nodes if u in prev}
    label = max(max(assignment.values(), default=-1), prev.fresh_label() - 1) + 1
    for u in nodes:
        if u not in assignment:
            assignment[u] = label
            label += 1
    return Partition(assignment, graph)


def run_tick(snapshot, prev_partition: Optional[Partition] = None, config: EngineConfig | None = None) -> TickResult:
    """Play the community game on one sealed snapshot."""
    config = config or EngineConfig()
    if snapshot.edge_mass <= 0:
        raise DegenerateInputError("snapshot has no edges")
    nodes = _game_nodes(snapshot, config.fi_threshold)
    if not nodes:
        raise DegenerateInputError("snapshot has no tracked nodes")
    n = len(nodes)
    prev = prev_partition if config.carry_over_partition else None
    partition = initial_partition(snapshot, nodes, prev)

    lam = config.lam
    window = config.nmi_window or n
    max_iter = config.max_iterations or config.max_iterations_factor * n
    dist = uniform_distribution(nodes, seed=config.seed)
    q = modularity_from_aggregates(partition, config.gamma)
    trace = [(0, q, 0)]
    switches = 0
    checkpoint = partition.assignment
    converged = False
    nash = None
    it = 0
    m = snapshot.edge_mass

    while it < max_iter:
        it += 1
        node = sample_node(dist)
        delta = best_strategy(snapshot, partition, node, lam, config.gamma, config.retention_variant)
        if delta is not None:
            old, new = delta.old_label, delta.new_label
            before = _pair_q(partition, old, new, m, config.gamma)
            partition.apply(delta)
            q += _pair_q(partition, old, new, m, config.gamma) - before
            switches += 1
            trace.append((it, q, switches))
            if config.downweight:
                downweight(dist, node, lam)
        if it % window == 0:
            if terminate_check(checkpoint, partition, config.eta):
                if not config.require_equilibrium:
                    converged = True
                    break
                nash, _ = is_nash_equilibrium(snapshot, partition, lam, config.gamma, config.retention_variant)
                if nash:
                    converged = True
                    break
            checkpoint = partition.assignment

    # resync the running value to wash out accumulated rounding
    q = modularity_from_aggregates(partition, config.gamma)
    if trace[-1][0] == it:
        trace[-1] = (it, q, switches)
    else:
        trace.append((it, q, switches))
    return TickResult(partition, it, trace, switches, converged, nash if converged else None)


def _pair_q(partition: Partition, a: int, b: int, m: int, gamma: float) -> float:
    total = 0.0
    for label in (a, b):
        if partition.has_community(label):
            total += partition.internal_mass(label) / m - gamma * (partition.degree_sum(label) / (2.0 * m)) ** 2
    return total


def run_gcd(snapshot, prev_partition: Optional[Partition] = None, config: EngineConfig | None = None) -> TickResult:
    """Plain best-response game: ``lam = 1`` and a sampler that never changes."""
    config = config or EngineConfig()
    return run_tick(snapshot, prev_partition, replace(config, lam=1.0, downweight=False))
