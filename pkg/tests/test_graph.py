import itertools

import pytest
from hypothesis import given, strategies as st

from partord.graph import (TopologyError, bfs_tree, build_topology, circular_distance,
                           color_partition, complete_graph, greedy_coloring, grid_graph,
                           is_proper, make_coloring, path_graph, ring_graph, uniform_coloring)


def test_small_families():
    assert complete_graph(4).degree(1) == 3
    assert len(complete_graph(5).edges) == 10
    assert ring_graph(8).neighbors(1) == (2, 8)
    assert path_graph(3).neighbors(2) == (1, 3)
    g = grid_graph(3, 3)
    assert g.neighbors(5) == (2, 4, 6, 8)
    assert len(g.edges) == 12


@pytest.mark.parametrize("n, edges, msg", [
    (0, [], "node count"),
    (3, [(1, 2)], "disconnected"),
    (2, [(1, 1)], "self-loop"),
    (2, [(1, 2), (2, 1)], "duplicate"),
    (2, [(1, 3)], "outside"),
])
def test_bad_topologies(n, edges, msg):
    with pytest.raises(TopologyError, match=msg):
        build_topology(n, edges)


def test_distances_ring():
    d = ring_graph(8).all_distances()
    assert d[1][5] == 4 and d[1][8] == 1 and d[3][7] == 4


def test_greedy_triangle_and_grid():
    tri = complete_graph(3)
    c = greedy_coloring(tri)
    assert c.ncolors == 3 and is_proper(tri, c)
    g = grid_graph(3, 3)
    c = greedy_coloring(g)
    assert c.ncolors == 2 and is_proper(g, c)


def test_uniform_and_partition():
    g = grid_graph(2, 2)
    u = uniform_coloring(g)
    assert u.ncolors == 1
    lower, upper = color_partition(g, u)
    assert all(not lower[i] for i in g.nodes)
    assert upper[1] == frozenset(g.neighbors(1))
    c = make_coloring([0, 1, 1, 0])
    lower, upper = color_partition(g, c)
    assert lower[2] == {1, 4} and upper[1] == {2, 3}


def test_make_coloring_rejects_gaps():
    with pytest.raises(TopologyError):
        make_coloring([0, 2])


@given(st.integers(1, 6), st.integers(0, 5), st.integers(0, 5))
def test_circular_distance(nc, a, b):
    a, b = a % nc, b % nc
    d = circular_distance(a, b, nc)
    assert 0 <= d < nc
    assert (a + d) % nc == b
    assert d == 0 or circular_distance(b, a, nc) == nc - d


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(1, 9))
    # random spanning tree plus extra edges keeps the graph connected
    edges = {(draw(st.integers(1, i - 1)), i) for i in range(2, n + 1)}
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    if pairs:
        edges |= set(draw(st.lists(st.sampled_from(pairs), max_size=10)))
    return build_topology(n, sorted(edges))


@given(connected_graphs())
def test_greedy_is_proper_and_bounded(g):
    c = greedy_coloring(g)
    assert is_proper(g, c)
    assert c.ncolors <= max(g.degree(i) for i in g.nodes) + 1


@given(connected_graphs())
def test_bfs_tree_matches_distances(g):
    parent, depth, children = bfs_tree(g, 1)
    assert depth[1:] == g.distances_from(1)[1:]
    for i in g.nodes:
        if i != 1:
            assert g.has_edge(i, parent[i]) and depth[parent[i]] == depth[i] - 1
            assert i in children[parent[i]]
