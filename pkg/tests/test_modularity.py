import logging
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.metrics import normalized_mutual_info_score

from densewatch.datasets import KARATE_EDGES, TWO_TRIANGLES
from densewatch.modularity import (
    ContractError,
    DegenerateInputError,
    Partition,
    PartitionDelta,
    approx_modularity,
    community_modularity,
    exact_modularity,
    modularity_error_bound,
    modularity_from_aggregates,
    nmi,
)
from densewatch.oracle import ExactGraph
from densewatch.snapshot import SketchConfig, build_snapshot

WIDE = SketchConfig(cms_width=1 << 16, cms_depth=3)
edge_lists = st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), min_size=1, max_size=60)


def triangles_partition(graph=None):
    return Partition.from_communities([[1, 2, 3], [4, 5, 6]], graph)


def nx_modularity(edges, assignment):
    g = nx.Graph()
    for u, v in edges:
        w = g.get_edge_data(u, v, {"weight": 0})["weight"]
        g.add_edge(u, v, weight=w + 1)
    groups = {}
    for u, c in assignment.items():
        groups.setdefault(c, set()).add(u)
    return nx.community.modularity(g, list(groups.values()), weight="weight")


# -- exact modularity --------------------------------------------------------------------


def test_two_triangles_is_half():
    g = ExactGraph.from_edges(TWO_TRIANGLES)
    assert exact_modularity(g, triangles_partition()) == pytest.approx(0.5)


def test_single_community_is_zero():
    g = ExactGraph.from_edges(KARATE_EDGES)
    assert exact_modularity(g, Partition({u: 0 for u in g.nodes()})) == pytest.approx(0.0, abs=1e-12)


def test_empty_graph_is_degenerate():
    with pytest.raises(DegenerateInputError):
        exact_modularity(ExactGraph(), Partition({}))


def test_partition_must_cover_graph():
    g = ExactGraph.from_edges(TWO_TRIANGLES)
    with pytest.raises(ContractError):
        exact_modularity(g, Partition({1: 0, 2: 0}))


def test_karate_four_groups_in_expected_range():
    g = nx.karate_club_graph()
    communities = nx.community.greedy_modularity_communities(g)
    part = Partition.from_communities(communities)
    q = exact_modularity(ExactGraph.from_edges(KARATE_EDGES), part)
    assert 0.35 <= q <= 0.45


@given(edge_lists, st.lists(st.integers(0, 4), min_size=16, max_size=16))
def test_matches_networkx(edges, labels):
    g = ExactGraph.from_edges(edges)
    assignment = {u: labels[u] for u in g.nodes()}
    q = exact_modularity(g, Partition(assignment))
    assert q == pytest.approx(nx_modularity(edges, assignment), abs=1e-9)
    assert -1.0 <= q < 1.0


@given(edge_lists, st.lists(st.integers(0, 4), min_size=16, max_size=16))
def test_relabeling_invariance(edges, labels):
    g = ExactGraph.from_edges(edges)
    p = Partition({u: labels[u] for u in g.nodes()})
    renamed = p.relabeled({c: 100 - c for c in p.labels})
    assert exact_modularity(g, p) == pytest.approx(exact_modularity(g, renamed), abs=1e-12)


# -- approximate modularity -----------------------------------------------------------------


@given(edge_lists, st.lists(st.integers(0, 4), min_size=16, max_size=16))
def test_collision_free_snapshot_is_exact(edges, labels):
    s = build_snapshot(edges, config=WIDE)
    g = ExactGraph.from_edges(edges)
    p = Partition({u: labels[u] for u in g.nodes()})
    assert approx_modularity(s, p) == pytest.approx(exact_modularity(g, p), abs=1e-9)


@given(edge_lists, st.lists(st.integers(0, 4), min_size=16, max_size=16))
def test_decomposition_identity(edges, labels):
    s = build_snapshot(edges, config=SketchConfig(cms_width=7, cms_depth=2))
    p = Partition({u: labels[u] for u in s.nodes()}, s)
    total = sum(community_modularity(s, p, c) for c in p.labels)
    assert total == pytest.approx(approx_modularity(s, p), abs=1e-9)
    assert modularity_from_aggregates(p) == pytest.approx(total, abs=1e-9)


def test_single_community_zero_with_exact_estimates():
    s = build_snapshot(KARATE_EDGES, config=WIDE)
    assert approx_modularity(s, Partition({u: 0 for u in s.nodes()})) == pytest.approx(0.0, abs=1e-12)


def test_single_community_can_turn_positive_when_pairs_collide():
    # edge estimates inflate faster than degree estimates once the edge
    # sketch is overloaded, so one community no longer scores <= 0
    rng = np.random.default_rng(0)
    edges = list(zip(rng.integers(0, 400, 3000).tolist(), rng.integers(0, 400, 3000).tolist()))
    s = build_snapshot(edges)
    p = Partition({u: 0 for u in s.nodes()}, s)
    w_in, d = p.internal_mass(0), p.degree_sum(0)
    assert w_in > s.edge_mass and d >= 2 * s.edge_mass
    assert approx_modularity(s, p) == pytest.approx(w_in / s.edge_mass - (d / (2 * s.edge_mass)) ** 2)
    assert approx_modularity(s, p) > 0


def test_empty_snapshot_is_degenerate():
    s = build_snapshot([])
    with pytest.raises(DegenerateInputError):
        approx_modularity(s, Partition({}))


def test_community_modularity_examples():
    s = build_snapshot(TWO_TRIANGLES, config=WIDE)
    p = triangles_partition(s)
    assert community_modularity(s, p, p[1]) == pytest.approx(0.25)
    single = Partition.singletons(s.nodes(), s)
    assert community_modularity(s, single, single[1]) == pytest.approx(-((2 / 12) ** 2))
    whole = Partition({u: 0 for u in s.nodes()}, s)
    assert community_modularity(s, whole, 0) == pytest.approx(0.0, abs=1e-12)


# -- partition bookkeeping -----------------------------------------------------------------------


@given(edge_lists, st.lists(st.tuples(st.integers(0, 15), st.integers(0, 6)), max_size=40))
def test_incremental_aggregates_match_rebuild(edges, moves):
    g = ExactGraph.from_edges(edges)
    p = Partition.singletons(g.nodes(), g)
    for node, label in moves:
        if node in p and p[node] != label:
            p.move(node, label)
    fresh = Partition(p.assignment, g)
    for c in p.labels:
        assert p.internal_mass(c) == fresh.internal_mass(c)
        assert p.degree_sum(c) == fresh.degree_sum(c)
        assert p.links(c) == fresh.links(c)


def test_delta_requires_a_change():
    with pytest.raises(ValueError):
        PartitionDelta(1, 2, 2, 0.0)


# -- nmi ----------------------------------------------------------------------------------


def test_nmi_identity_and_zero_entropy_cases():
    p = Partition.from_communities([[1, 2], [3, 4]])
    assert nmi(p, p) == pytest.approx(1.0)
    assert nmi(p, Partition({1: 0, 2: 0, 3: 0, 4: 0})) == 0.0
    one = Partition({1: 0, 2: 0})
    assert nmi(one, Partition({1: 5, 2: 5})) == 1.0


def test_nmi_rejects_different_node_sets():
    with pytest.raises(ContractError):
        nmi(Partition({1: 0}), Partition({2: 0}))


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=2, max_size=80))
def test_nmi_matches_sklearn(pairs):
    a = {i: x for i, (x, _) in enumerate(pairs)}
    b = {i: y for i, (_, y) in enumerate(pairs)}
    expected = normalized_mutual_info_score(list(a.values()), list(b.values()), average_method="arithmetic")
    got = nmi(Partition(a), Partition(b))
    assert got == pytest.approx(expected, abs=1e-9)
    assert got == pytest.approx(nmi(Partition(b), Partition(a)), abs=1e-12)
    assert 0.0 <= got <= 1.0 + 1e-12


def test_nmi_of_independent_labels_shrinks():
    rng = np.random.default_rng(0)
    n = 20_000
    a = Partition(dict(enumerate(rng.integers(0, 4, n).tolist())))
    b = Partition(dict(enumerate(rng.integers(0, 4, n).tolist())))
    assert nmi(a, b) < 0.01


# -- error bound ----------------------------------------------------------------------------


def test_bound_arithmetic():
    s = build_snapshot([(i, i + 1) for i in range(100)])
    assert s.distinct_edges == 100
    assert modularity_error_bound(s, math.e / 719, 0.0) == pytest.approx(100 * math.e / 1438)
    assert modularity_error_bound(s) == pytest.approx(100 * math.e / 1438)
    assert modularity_error_bound(s, 0.01, 0.005) == pytest.approx(0.0)


def test_negative_bound_clamped_with_warning(caplog):
    s = build_snapshot([(1, 2)])
    with caplog.at_level(logging.WARNING):
        assert modularity_error_bound(s, 0.01, 0.5) == 0.0
    assert "clamped" in caplog.text
