"""Graph construction, I/O, generators and degree statistics."""

import numpy as np
import pytest

from gnntal.graph import (
    GraphFormatError,
    degree_stats,
    from_edges,
    gen_ba,
    gen_er,
    gen_ws,
    largest_component,
    load_edge_list,
    save_edge_list,
    segment_sums,
)


def assert_canonical(g):
    """Symmetry, dedup, sorted neighbor lists, offset consistency."""
    assert g.offsets[0] == 0 and g.offsets[-1] == g.neighbors.size
    for v in range(g.num_nodes):
        nbrs = g.neighbors_of(v)
        assert np.all(np.diff(nbrs) > 0), f"node {v}: neighbors not strictly ascending"
        assert v not in nbrs, f"node {v}: self-loop"
        for u in nbrs:
            assert v in g.neighbors_of(int(u)), f"edge ({v},{u}) not symmetric"
    assert int(g.degrees.sum()) == 2 * g.num_edges


class TestLoadEdgeList:
    def test_basic(self):
        g = load_edge_list("a b\nb c")
        assert g.num_nodes == 3
        assert list(g.edges()) == [(0, 1), (1, 2)]
        assert g.node_labels == ("a", "b", "c")
        assert_canonical(g)

    def test_duplicates_and_self_loops_dropped(self):
        g = load_edge_list("0 1\n1 0\n0 0")
        assert g.num_nodes == 2
        assert list(g.edges()) == [(0, 1)]

    def test_comments_and_blank_lines(self):
        g = load_edge_list("# header\n\na b\n  # another\nb c\n")
        assert g.num_nodes == 3 and g.num_edges == 2

    def test_malformed_line_reports_number(self):
        with pytest.raises(GraphFormatError, match="line 2"):
            load_edge_list("a b\na b c")

    def test_empty_input(self):
        with pytest.raises(GraphFormatError, match="empty"):
            load_edge_list("# nothing\n")

    def test_first_appearance_ids(self):
        g = load_edge_list("z y\nx z")
        assert g.node_labels == ("z", "y", "x")

    def test_round_trip(self):
        text = "a b\nb c\nc a\nd a"
        g = load_edge_list(text)
        g2 = load_edge_list(save_edge_list(g))
        assert list(g.edges()) == list(g2.edges())
        assert save_edge_list(g) == save_edge_list(g2)


class TestDegreeStats:
    def test_regular_graph(self, k4):
        # K4 is 3-regular
        s = degree_stats(k4)
        assert s.mean_degree == 3.0 and s.mean_square_degree == 9.0

    def test_star(self, star):
        # degrees {4,1,1,1,1}: <k> = 8/5, <k^2> = 20/5
        s = degree_stats(star)
        assert s.mean_degree == pytest.approx(1.6)
        assert s.mean_square_degree == pytest.approx(4.0)

    def test_isolated_node(self):
        g = from_edges(1, [])
        s = degree_stats(g)
        assert s.mean_degree == 0.0 and s.mean_square_degree == 0.0

    def test_jensen(self):
        g = gen_er(60, 0.1, seed=5)
        s = degree_stats(g)
        assert s.mean_square_degree >= s.mean_degree**2 >= 0

    def test_sum_identity(self):
        g = gen_ba(50, 3, seed=1)
        s = degree_stats(g)
        assert s.mean_degree * g.num_nodes == int(g.degrees.sum())


class TestGenerators:
    def test_er_empty(self):
        g = gen_er(10, 0.0, seed=3)
        assert g.num_nodes == 10 and g.num_edges == 0

    def test_er_complete(self):
        g = gen_er(5, 1.0, seed=3)
        assert g.num_edges == 10
        assert_canonical(g)

    def test_er_invalid(self):
        with pytest.raises(ValueError):
            gen_er(5, 1.5, seed=0)

    def test_ba_edge_count(self):
        # clique seed on m+1 nodes, then m edges per later node
        g = gen_ba(100, 2, seed=7)
        assert g.num_edges == 2 * 98 + 1
        assert_canonical(g)

    def test_ba_invalid(self):
        with pytest.raises(ValueError):
            gen_ba(5, 5, seed=0)

    def test_ws_degree_preserved_without_rewiring(self):
        g = gen_ws(20, 4, 0.0, seed=2)
        assert np.all(g.degrees == 4)
        assert_canonical(g)

    def test_ws_rewired_stays_canonical(self):
        g = gen_ws(30, 6, 0.3, seed=2)
        assert g.num_edges == 30 * 3  # rewiring preserves edge count
        assert_canonical(g)

    def test_ws_invalid(self):
        with pytest.raises(ValueError):
            gen_ws(10, 3, 0.1, seed=0)

    @pytest.mark.parametrize("maker", [
        lambda s: gen_er(40, 0.1, s),
        lambda s: gen_ba(40, 2, s),
        lambda s: gen_ws(40, 4, 0.2, s),
    ])
    def test_seed_determinism(self, maker):
        a, b = maker(123), maker(123)
        assert np.array_equal(a.offsets, b.offsets)
        assert np.array_equal(a.neighbors, b.neighbors)
        c = maker(124)
        assert not (
            np.array_equal(a.offsets, c.offsets)
            and np.array_equal(a.neighbors, c.neighbors)
        )


class TestLargestComponent:
    def test_connected_identity(self, k4):
        g = largest_component(k4)
        assert g.num_nodes == 4 and g.num_edges == 6

    def test_picks_triangle(self):
        # two disjoint edges plus a triangle
        g = from_edges(7, [(0, 1), (2, 3), (4, 5), (5, 6), (4, 6)])
        lc = largest_component(g)
        assert lc.num_nodes == 3 and lc.num_edges == 3

    def test_matches_bfs_oracle(self):
        g = gen_er(80, 0.02, seed=11)
        lc = largest_component(g)
        # independent BFS component sweep
        seen = np.zeros(g.num_nodes, dtype=bool)
        best = 0
        for s in range(g.num_nodes):
            if seen[s]:
                continue
            size, queue = 0, [s]
            seen[s] = True
            while queue:
                u = queue.pop()
                size += 1
                for v in g.neighbors_of(u):
                    if not seen[v]:
                        seen[v] = True
                        queue.append(int(v))
            best = max(best, size)
        assert lc.num_nodes == best

    def test_labels_follow_nodes(self):
        g = load_edge_list("a b\nc d\nd e")
        lc = largest_component(g)
        assert lc.node_labels == ("c", "d", "e")


def test_segment_sums_handles_empty_slices():
    g = from_edges(4, [(1, 2)])  # nodes 0 and 3 isolated
    vals = np.ones(g.neighbors.size)
    sums = segment_sums(g.offsets, vals)
    assert sums.tolist() == [0.0, 1.0, 1.0, 0.0]


def test_graph_is_immutable(k4):
    with pytest.raises(ValueError):
        k4.neighbors[0] = 99
