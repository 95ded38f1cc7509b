"""Structural features against hand calculations and networkx oracles."""

import networkx as nx
import numpy as np
import pytest

from gnntal.features import (
    FEATURE_NAMES,
    centrality_to_csv,
    clustering_coefficient,
    feature_matrix,
    h_index,
    k_shell,
    pagerank,
    triangle_counts,
)
from gnntal.graph import from_edges, gen_ba, gen_er, load_edge_list


def to_nx(g):
    G = nx.Graph()
    G.add_nodes_from(range(g.num_nodes))
    G.add_edges_from(g.edges())
    return G


class TestKShell:
    def test_k4_uniform(self, k4):
        assert k_shell(k4).scores.tolist() == [3.0] * 4

    def test_path_all_ones(self, path4):
        assert k_shell(path4).scores.tolist() == [1.0] * 4

    def test_cycle_with_pendant(self):
        # C5 on 0..4 plus pendant 5 attached to 0
        g = from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 5)])
        assert k_shell(g).scores.tolist() == [2.0, 2.0, 2.0, 2.0, 2.0, 1.0]

    def test_matches_networkx_core_number(self):
        g = gen_er(60, 0.08, seed=3)
        mine = k_shell(g).scores
        theirs = nx.core_number(to_nx(g))
        assert mine.tolist() == [float(theirs[v]) for v in range(g.num_nodes)]

    def test_definition_brute_force(self):
        # removing all nodes of coreness >= c leaves no survivor with >= c
        # surviving neighbors, for every c present
        g = gen_ba(40, 2, seed=9)
        core = k_shell(g).scores
        for c in np.unique(core):
            survivors = {v for v in range(g.num_nodes) if core[v] < c}
            for v in survivors:
                alive = sum(1 for u in g.neighbors_of(v) if int(u) in survivors)
                assert alive < c


class TestHIndex:
    def test_neighbor_degree_scan(self):
        # center 0 with neighbor degrees [5,4,3,2,1] -> h = 3
        edges = [(0, i) for i in range(1, 6)]
        extra = 6
        for i, want in enumerate([5, 4, 3, 2, 1], start=1):
            for _ in range(want - 1):
                edges.append((i, extra))
                extra += 1
        g = from_edges(extra, edges)
        assert h_index(g).scores[0] == 3.0

    def test_isolated_node(self):
        g = from_edges(2, [])
        assert h_index(g).scores.tolist() == [0.0, 0.0]

    def test_k4(self, k4):
        assert h_index(k4).scores.tolist() == [3.0] * 4

    def test_bounds(self):
        g = gen_er(50, 0.1, seed=7)
        h = h_index(g).scores
        deg = g.degrees
        for v in range(g.num_nodes):
            assert h[v] <= deg[v]
            if deg[v]:
                assert h[v] <= deg[g.neighbors_of(v)].max()


class TestClustering:
    def test_k4_complete(self, k4):
        assert clustering_coefficient(k4).scores.tolist() == [1.0] * 4

    def test_star_center_zero(self, star):
        assert clustering_coefficient(star).scores.tolist() == [0.0] * 5

    def test_c4_no_triangles(self):
        g = from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        assert clustering_coefficient(g).scores.tolist() == [0.0] * 4

    def test_matches_networkx(self):
        g = gen_er(40, 0.15, seed=5)
        mine = clustering_coefficient(g).scores
        theirs = nx.clustering(to_nx(g))
        np.testing.assert_allclose(mine, [theirs[v] for v in range(g.num_nodes)], atol=1e-12)

    def test_triangle_counts_match_networkx(self):
        g = gen_ba(35, 3, seed=2)
        theirs = nx.triangles(to_nx(g))
        assert triangle_counts(g).tolist() == [theirs[v] for v in range(g.num_nodes)]


class TestPagerank:
    def test_complete_graph_uniform(self, k4):
        np.testing.assert_allclose(pagerank(k4).scores, 0.25, atol=1e-9)

    def test_two_disconnected_edges_uniform(self):
        g = from_edges(4, [(0, 1), (2, 3)])
        np.testing.assert_allclose(pagerank(g).scores, 0.25, atol=1e-9)

    def test_path3_fixed_point(self):
        # solve e = 0.05 + 0.85*c/2, c = 0.05 + 0.85*2e by hand
        g = from_edges(3, [(0, 1), (1, 2)])
        scores = pagerank(g, damping=0.85).scores
        assert scores[1] == pytest.approx(0.4864864864864865, abs=1e-8)
        assert scores[0] == pytest.approx(0.25675675675675674, abs=1e-8)

    def test_normalization(self):
        for seed in range(3):
            g = gen_er(50, 0.1, seed=seed)
            assert abs(pagerank(g).scores.sum() - 1.0) < 1e-8

    def test_matches_networkx(self):
        g = gen_ba(40, 2, seed=4)
        mine = pagerank(g, tol=1e-12).scores
        theirs = nx.pagerank(to_nx(g), alpha=0.85, tol=1e-12)
        np.testing.assert_allclose(mine, [theirs[v] for v in range(g.num_nodes)], atol=1e-8)


class TestFeatureMatrix:
    def test_k4_all_zero_columns(self, k4):
        fm = feature_matrix(k4)
        np.testing.assert_array_equal(fm.values, 0.0)

    def test_star_raw_degree_column(self, star):
        fm = feature_matrix(star)
        assert fm.column_means[0] == pytest.approx(1.6)
        raw_degree = fm.values[:, 0] * fm.column_stds[0] + fm.column_means[0]
        np.testing.assert_allclose(raw_degree, [4, 1, 1, 1, 1], atol=1e-12)

    def test_standardization_invariants(self):
        g = gen_ba(60, 2, seed=8)
        fm = feature_matrix(g)
        assert fm.values.shape == (60, 10)
        assert np.all(np.isfinite(fm.values))
        for j in range(10):
            col = fm.values[:, j]
            assert abs(col.mean()) < 1e-9
            std = col.std()
            assert std == pytest.approx(1.0, abs=1e-9) or std == 0.0

    def test_permutation_equivariance(self):
        g = gen_er(30, 0.2, seed=6)
        fm = feature_matrix(g)
        perm = np.random.default_rng(0).permutation(30)
        inv = np.argsort(perm)
        relabeled = from_edges(30, [(int(inv[u]), int(inv[v])) for u, v in g.edges()])
        fm2 = feature_matrix(relabeled)
        np.testing.assert_allclose(fm2.values[inv], fm.values, atol=1e-9)

    def test_spot_check_independent_recomputation(self):
        g = load_edge_list("a b\nb c\nc a\nc d\nd e\ne f\nf d\nb d")
        fm = feature_matrix(g)
        raw = fm.values * np.where(fm.column_stds > 0, fm.column_stds, 1.0) + fm.column_means
        G = to_nx(g)
        for v in [0, 2, 3, 5]:
            assert raw[v, 0] == G.degree(v)
            two_hop = {w for u in G[v] for w in G[u]} | set(G[v])
            two_hop.discard(v)
            assert raw[v, 1] == len(two_hop)
            assert raw[v, 2] == sum(G.degree(u) for u in G[v])
            assert raw[v, 3] == pytest.approx(np.mean([G.degree(u) for u in G[v]]))
            assert raw[v, 5] == nx.triangles(G, v)

    def test_names_frozen(self):
        assert FEATURE_NAMES == (
            "degree",
            "two_hop_size",
            "neighbor_degree_sum",
            "neighbor_degree_mean",
            "clustering",
            "triangles",
            "k_shell",
            "neighbor_k_shell_mean",
            "h_index",
            "pagerank",
        )


def test_centrality_csv_shape(star):
    csv = centrality_to_csv(k_shell(star))
    lines = csv.strip().split("\n")
    assert lines[0] == "node_id,k_shell"
    assert len(lines) == 6
