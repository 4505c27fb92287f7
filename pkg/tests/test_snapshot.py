import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from densewatch.datasets import TWO_TRIANGLES
from densewatch.oracle import exact_replay
from densewatch.snapshot import (
    EdgeEvent,
    SketchConfig,
    SnapshotBuilder,
    StateError,
    build_snapshot,
    canonical_edge_key,
    canonical_edge_keys,
    node_id,
)

WIDE = SketchConfig(cms_width=1 << 16, cms_depth=3)
edge_lists = st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=120)


def test_key_is_symmetric_and_defined_for_loops():
    assert canonical_edge_key(3, 9) == canonical_edge_key(9, 3)
    assert isinstance(canonical_edge_key(4, 4), int)


def test_vectorized_keys_match_scalar():
    src = [1, 9, 2**63, 7]
    dst = [2, 3, 5, 7]
    assert canonical_edge_keys(src, dst).tolist() == [canonical_edge_key(u, v) for u, v in zip(src, dst)]


def test_no_collisions_on_a_million_pairs():
    rng = np.random.default_rng(0)
    u = rng.integers(0, 2**63, 1_000_000, dtype=np.uint64)
    v = rng.integers(0, 2**63, 1_000_000, dtype=np.uint64)
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    keys = canonical_edge_keys(pairs[:, 0], pairs[:, 1])
    assert np.unique(keys).size == pairs.shape[0]


def test_node_id_is_stable():
    assert node_id("10.0.0.1") == node_id("10.0.0.1") != node_id("10.0.0.2")


def test_single_edge():
    b = SnapshotBuilder(0)
    b.ingest(EdgeEvent(1, 2, 0))
    s = b.seal()
    assert s.edge_mass == 1
    assert s.degree(1) >= 1 and s.degree(2) >= 1
    assert 2 in s.neighbors(1)


def test_repeated_edge_overestimates():
    s = build_snapshot([(1, 2)] * 5)
    assert s.edge_weight(1, 2) >= 5 and s.degree(1) >= 5


def test_two_triangles():
    s = build_snapshot(TWO_TRIANGLES)
    assert s.edge_mass == 6
    assert s.degree_cms.total_mass == 12
    assert s.neighbors(1) == {2, 3} and s.neighbors(5) == {4, 6}


def test_empty_seal():
    s = SnapshotBuilder(0).seal()
    assert s.edge_mass == 0 and s.nodes() == []


def test_double_seal_and_late_write():
    b = SnapshotBuilder(0)
    b.seal()
    with pytest.raises(StateError):
        b.seal()
    with pytest.raises(StateError):
        b.ingest(EdgeEvent(1, 2, 0))


def test_tick_mismatch():
    with pytest.raises(StateError):
        SnapshotBuilder(3).ingest(EdgeEvent(1, 2, 4))


def test_self_loop_counts_twice_for_degree():
    s = build_snapshot([(7, 7)], config=WIDE)
    assert s.degree(7) == 2 and s.self_loops(7) == 1
    assert s.degree_cms.total_mass == 2 * s.edge_mass


def test_untouched_pair_reads_zero():
    s = build_snapshot(TWO_TRIANGLES)
    assert s.edge_weight(1, 5) == 0


def test_star_degree():
    s = build_snapshot([(0, i) for i in range(1, 10)])
    assert s.degree(0) >= 9


@given(edge_lists)
def test_invariants_after_ingest(edges):
    s = build_snapshot(edges)
    assert s.edge_mass == s.edge_cms.total_mass == len(edges)
    assert s.degree_cms.total_mass == 2 * s.edge_mass
    for u in s.nodes():
        for v in s.neighbors(u):
            assert u in s.neighbors(v)
            assert s.edge_weight(u, v) == s.edge_weight(v, u)
    assert len(s.nodes()) <= s.config.fi_capacity


@given(edge_lists)
def test_below_capacity_estimates_are_exact(edges):
    s = build_snapshot(edges, config=WIDE)
    g = exact_replay(edges)
    assert sorted(s.nodes()) == g.nodes()
    for u in g.nodes():
        assert s.degree(u) == g.degree(u)
        assert s.neighbor_weights(u) == g.neighbor_weights(u)
        assert s.self_loops(u) == g.self_loops(u)
    assert s.distinct_edges == g.distinct_edges


def test_estimates_stay_above_truth_on_dense_stream():
    rng = np.random.default_rng(3)
    edges = list(zip(rng.integers(0, 300, 5000).tolist(), rng.integers(0, 300, 5000).tolist()))
    s = build_snapshot(edges)
    g = exact_replay(edges)
    for u, v, w in g.edges():
        assert s.edge_weight(u, v) >= w
    for u in g.nodes():
        assert s.degree(u) >= g.degree(u)


def test_heavy_nodes_first():
    edges = [(0, i) for i in range(1, 20)] + [(1, 2)] * 3
    s = build_snapshot(edges)
    assert s.tracked_nodes(0.0)[0] == 0


def test_eviction_keeps_state_bounded():
    cfg = SketchConfig(fi_capacity=16)
    rng = np.random.default_rng(1)
    b = SnapshotBuilder(0, cfg)
    b.ingest_many(rng.integers(0, 5000, 20_000), rng.integers(0, 5000, 20_000))
    s = b.seal()
    assert len(s.nodes()) <= 16
    tracked = set(s.nodes())
    for u, v in s.tracked_pairs():
        assert u in tracked and v in tracked
    assert sum(1 for _ in s.tracked_pairs()) <= cfg.pair_capacity


def test_bulk_and_single_ingest_agree():
    rng = np.random.default_rng(9)
    src, dst = rng.integers(0, 200, 3000), rng.integers(0, 200, 3000)
    a = SnapshotBuilder(0)
    a.ingest_many(src, dst)
    b = SnapshotBuilder(0)
    for u, v in zip(src.tolist(), dst.tolist()):
        b.ingest_edge(u, v)
    assert a.seal().to_bytes() == b.seal().to_bytes()


def test_serialized_size_is_fixed():
    small = build_snapshot([(1, 2)])
    rng = np.random.default_rng(4)
    big = build_snapshot(list(zip(rng.integers(0, 9000, 50_000).tolist(), rng.integers(0, 9000, 50_000).tolist())))
    assert len(small.to_bytes()) == len(big.to_bytes())


def test_accumulating_builder_continues_from_snapshot():
    first = build_snapshot(TWO_TRIANGLES, tick=0)
    b = SnapshotBuilder.continuing(first, 1)
    b.ingest_edge(1, 2)
    second = b.seal()
    assert second.edge_mass == 7 and second.edge_weight(1, 2) >= 2
    assert first.edge_mass == 6 and first.edge_weight(1, 2) >= 1
