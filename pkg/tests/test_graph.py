import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphlet_gibbs.graph import (
    Graph,
    GraphFormatError,
    distance2_graph,
    grid_graph,
    load_graph,
    neighbors,
    path_graph,
    random_bounded_degree_graph,
    random_regular_graph,
    star_graph,
)


def test_load_path_and_star():
    p = load_graph("3 2\n0 1\n1 2")
    assert p == path_graph(3) and p.max_degree == 2
    s = load_graph("4 3\n0 1\n0 2\n0 3")
    assert s == star_graph(3) and s.max_degree == 3


@pytest.mark.parametrize("text", [
    "2 1\n0 0",          # self-loop
    "3 2\n0 1\n1 0",     # duplicate edge
    "2 1\n0 5",          # out of range
    "3 3\n0 1\n1 2",     # edge count mismatch
    "x y",
    "",
    "4 2\n0 1\n2 3\nbipartition 1",  # edge 2-3 inside the right side
])
def test_load_rejects(text):
    with pytest.raises(GraphFormatError):
        load_graph(text)


def test_comments_and_bipartition():
    g = load_graph("# c4\n4 4\n0 2\n2 1\n1 3\n3 0\nbipartition 2\n")
    assert g.bipartition == ((0, 1), (2, 3))


def test_neighbors():
    s = star_graph(3)
    assert list(neighbors(s, 0)) == [1, 2, 3]
    assert list(neighbors(s, 2)) == [0]
    assert list(neighbors(path_graph(3), 1)) == [0, 2]


def test_distance2_examples():
    # C4 with L = {0, 1}, R = {2, 3}: the two right vertices share both left ones
    c4 = Graph.from_edges(4, [(0, 2), (2, 1), (1, 3), (3, 0)], 2)
    r2, right = distance2_graph(c4)
    assert right == (2, 3) and r2.edges() == [(0, 1)]
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)], 1)
    r2, right = distance2_graph(star)
    assert right == (1, 2, 3) and r2.edges() == [(0, 1), (0, 2), (1, 2)]
    iso = Graph.from_edges(4, [(0, 2), (1, 2)], 2)
    r2, right = distance2_graph(iso)
    assert r2.degree(right.index(3)) == 0


def test_distance2_needs_bipartition():
    with pytest.raises(GraphFormatError):
        distance2_graph(path_graph(3))


def _random_bipartite(rng, nl, nr, p):
    edges = [(u, nl + v) for u in range(nl) for v in range(nr) if rng.random() < p]
    return Graph.from_edges(nl + nr, edges, nl)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 6), st.integers(1, 6))
def test_distance2_degree_bound(seed, nl, nr):
    g = _random_bipartite(np.random.default_rng(seed), nl, nr, 0.5)
    left, right = g.bipartition
    dl = max((g.degree(v) for v in left), default=0)
    dr = max((g.degree(v) for v in right), default=0)
    r2, _ = distance2_graph(g)
    assert r2.max_degree <= dr * max(dl - 1, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(3, 12), st.integers(2, 4))
def test_symmetry_and_roundtrip(seed, n, d):
    g = random_bounded_degree_graph(n, min(d, n - 1), np.random.default_rng(seed))
    for v in range(n):
        for w in g.adjacency[v]:
            assert v in g.adjacency[w]
    assert g.max_degree == max(len(a) for a in g.adjacency)
    assert load_graph(g.serialize()) == g


def test_grid_bipartite_and_regular():
    g = grid_graph(2, 3, bipartite=True)
    assert g.bipartition is not None and len(g.bipartition[0]) == 3
    assert load_graph(g.serialize()) == g
    r = random_regular_graph(16, 3, np.random.default_rng(1))
    assert all(r.degree(v) == 3 for v in range(16))


def test_boundary_and_connectivity():
    s = star_graph(3)
    assert s.boundary([0]) == {1, 2, 3}
    assert s.boundary([1]) == {0}
    assert s.is_connected_subset([0, 1]) and not s.is_connected_subset([1, 2])
