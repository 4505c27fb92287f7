"""Streaming detection of dense, high-modularity communities in edge streams."""

from .sketches import CountMinSketch, FrequentItemsSketch, cms_params_from_bounds
from .snapshot import EdgeEvent, SketchConfig, SnapshotBuilder, TickSnapshot, build_snapshot, canonical_edge_key
from .modularity import (
    Partition,
    PartitionDelta,
    approx_modularity,
    community_modularity,
    exact_modularity,
    modularity_error_bound,
    nmi,
)
from .engine import EngineConfig, TickResult, is_nash_equilibrium, run_gcd, run_tick
from .oracle import ExactGraph, brute_force_best_partition, compare_modularity, exact_replay

__version__ = "0.1.0"
