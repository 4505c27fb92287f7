"""Best-response play on Zachary's karate club, with and without retention."""

import statistics

from densewatch.datasets import KARATE_EDGES
from densewatch.engine import EngineConfig, run_tick
from densewatch.oracle import ExactGraph
from densewatch.modularity import exact_modularity
from densewatch.snapshot import SketchConfig, build_snapshot


def main():
    snap = build_snapshot(KARATE_EDGES, config=SketchConfig(cms_width=1 << 16, cms_depth=3))
    graph = ExactGraph.from_edges(KARATE_EDGES)
    for lam in (1.0, 0.8):
        qs, its, sizes = [], [], []
        for seed in range(20):
            res = run_tick(snap, config=EngineConfig(lam=lam, seed=seed, fi_threshold=0.0))
            qs.append(exact_modularity(graph, res.partition))
            its.append(res.iterations_used)
            sizes.append(len(res.partition.communities))
        print(f"lambda={lam}: Q median {statistics.median(qs):.3f} (min {min(qs):.3f}, max {max(qs):.3f}), "
              f"iterations median {statistics.median(its):.0f}, communities median {statistics.median(sizes):.0f}")


if __name__ == "__main__":
    main()
