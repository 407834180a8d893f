import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from dfc.topology import (
    Graph, PlatoonSpec, SpecificationError, UnreachableError, build_platoon, eccentricity,
    is_connected, local_vertex_connectivity, max_tolerable_faults, platoon, reachable_set,
    vertex_connectivity,
)


def to_nx(g: Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(1, g.n + 1))
    h.add_edges_from(g.edges())
    return h


def brute_force_connectivity(g: Graph) -> int:
    """Smallest vertex set whose removal disconnects g (n - 1 if complete)."""
    h = to_nx(g)
    if g.is_complete():
        return g.n - 1
    for size in range(g.n - 1):
        for cut in itertools.combinations(h.nodes, size):
            rest = h.subgraph(set(h.nodes) - set(cut))
            if not nx.is_connected(rest):
                return size
    return g.n - 1


def test_platoon_5_2_edges():
    g = platoon(5, 2)
    assert set(g.edges()) == {(1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (3, 5), (4, 5)}


def test_platoon_saturated_is_complete():
    g = platoon(3, 2)
    assert g.is_complete()
    assert set(g.edges()) == {(1, 2), (1, 3), (2, 3)}


def test_platoon_8_1_is_path():
    g = platoon(8, 1)
    assert g.edges() == [(i, i + 1) for i in range(1, 8)]


@pytest.mark.parametrize("n,k", [(1, 1), (5, 0), (5, 5), (2, 2), (0, 1)])
def test_invalid_platoon_spec(n, k):
    with pytest.raises(SpecificationError):
        build_platoon(PlatoonSpec(n, k))


@pytest.mark.parametrize("n", range(2, 13))
def test_platoon_symmetric_no_self_loops(n):
    for k in range(1, n):
        adj = platoon(n, k).adjacency
        assert np.array_equal(adj, adj.T)
        assert not adj.diagonal().any()
        i, j = np.indices(adj.shape)
        assert np.array_equal(adj, (np.abs(i - j) > 0) & (np.abs(i - j) <= k))


def test_graph_rejects_asymmetric_and_loops():
    with pytest.raises(SpecificationError):
        Graph(2, np.array([[0, 1], [0, 0]], dtype=bool))
    with pytest.raises(SpecificationError):
        Graph(2, np.array([[1, 0], [0, 0]], dtype=bool))
    with pytest.raises(SpecificationError):
        Graph.from_edges([[1, 1]])


def test_degrees_and_selection():
    g = platoon(8, 2)
    assert [g.degree(i) for i in range(1, 9)] == [2, 3, 4, 4, 4, 4, 3, 2]
    c = g.selection(3)
    assert c.shape == (5, 8)
    assert np.array_equal(c.argmax(axis=1), [2, 0, 1, 3, 4])


@pytest.mark.parametrize("n,k,expected", [(8, 1, 1), (5, 2, 2), (20, 3, 3)])
def test_vertex_connectivity_examples(n, k, expected):
    g = platoon(n, k)
    assert vertex_connectivity(g) == expected
    assert nx.node_connectivity(to_nx(g)) == expected


def test_complete_and_disconnected():
    assert vertex_connectivity(platoon(4, 3)) == 3
    g = Graph.from_edges([[1, 2], [3, 4]])
    assert not is_connected(g)
    assert vertex_connectivity(g) == 0


@pytest.mark.parametrize("n", range(4, 13))
def test_platoon_is_k_connected(n):
    for k in range(1, min(4, n - 1) + 1):
        g = platoon(n, k)
        assert vertex_connectivity(g) == k == nx.node_connectivity(to_nx(g))


@st.composite
def graphs(draw, max_n=7):
    n = draw(st.integers(2, max_n))
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True))
    return Graph.from_edges(chosen, n=n)


@given(graphs())
def test_connectivity_matches_oracles(g):
    expected = brute_force_connectivity(g)
    assert vertex_connectivity(g) == expected
    assert nx.node_connectivity(to_nx(g)) == expected


@given(graphs())
def test_local_connectivity_matches_networkx(g):
    h = to_nx(g)
    for i, j in itertools.combinations(range(1, g.n + 1), 2):
        if not g.adjacency[i - 1, j - 1]:
            assert local_vertex_connectivity(g, i, j) == nx.node_connectivity(h, j, i)


@pytest.mark.parametrize("i,expected", [(4, 4), (2, 6), (1, 7), (8, 7)])
def test_eccentricity_path(i, expected):
    assert eccentricity(platoon(8, 1), i) == expected


def test_eccentricity_p8_2():
    assert eccentricity(platoon(8, 2), 2) == 3


@pytest.mark.parametrize("n", range(2, 21))
def test_eccentricity_closed_form(n):
    for k in range(1, min(4, n - 1) + 1):
        g = platoon(n, k)
        ecc = nx.eccentricity(to_nx(g))
        for i in range(1, n + 1):
            formula = max(math.ceil((i - 1) / k), math.ceil((n - i) / k))
            assert eccentricity(g, i) == formula == ecc[i]


def test_eccentricity_unreachable_raises():
    g = Graph.from_edges([[1, 2], [2, 3]], n=4)
    with pytest.raises(UnreachableError):
        eccentricity(g, 1)


def test_reachable_set():
    assert reachable_set(platoon(8, 1), 3) == set(range(1, 9))
    assert reachable_set(platoon(5, 2), 1) == {1, 2, 3, 4, 5}
    g = Graph.from_edges([[1, 2], [2, 3], [3, 4], [4, 6]], n=6)
    assert reachable_set(g, 1) == {1, 2, 3, 4, 6}
    assert reachable_set(g, 5) == {5}


@pytest.mark.parametrize("kappa,f", [(1, 0), (2, 0), (3, 1), (4, 1), (5, 2), (0, 0)])
def test_max_tolerable_faults(kappa, f):
    assert max_tolerable_faults(kappa) == f
