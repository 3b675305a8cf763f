from __future__ import annotations

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsepop.chordal import (
    MAX,
    MIN,
    MINFILL,
    ChordalGraph,
    Graph,
    NotChordalError,
    chordal_extension,
    extend_greedy_min,
    extend_maximal,
    extend_min_degree,
    is_chordal,
    maximal_cliques,
)


@st.composite
def graphs(draw, max_nodes=9):
    n = draw(st.integers(1, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph.from_positions(n, edges)


def to_nx(n, edges):
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(edges)
    return G


def naive_greedy(g: Graph, cost):
    """Recompute every cost from scratch at each elimination step."""
    adj = g.adjacency()
    alive = set(range(len(g)))
    order, added = [], set()
    while alive:
        v = min(alive, key=lambda u: (cost(adj, u), u))
        nb = sorted(adj[v])
        for a in range(len(nb)):
            for b in range(a + 1, len(nb)):
                x, y = nb[a], nb[b]
                if y not in adj[x]:
                    adj[x].add(y)
                    adj[y].add(x)
                    added.add((x, y))
        for w in nb:
            adj[w].discard(v)
        adj[v] = set()
        alive.discard(v)
        order.append(v)
    return order, added


def fill_cost(adj, v):
    nb = sorted(adj[v])
    return sum(1 for a in range(len(nb)) for b in range(a + 1, len(nb)) if nb[b] not in adj[nb[a]])


def degree_cost(adj, v):
    return len(adj[v])


def check_extension(g: Graph, cg: ChordalGraph):
    edges = cg.edges
    assert g.edges <= edges
    assert not (cg.extension_edges & g.edges)
    G = to_nx(len(g), edges)
    assert nx.is_chordal(G)
    expected = sorted(tuple(sorted(c)) for c in nx.chordal_graph_cliques(G))
    assert sorted(cg.cliques) == expected
    assert maximal_cliques(cg) == expected


@settings(max_examples=150, deadline=None)
@given(graphs())
def test_every_extension_is_a_chordal_supergraph(g):
    for kind in (MAX, MIN, MINFILL):
        check_extension(g, chordal_extension(g, kind))


@settings(max_examples=150, deadline=None)
@given(graphs())
def test_is_chordal_agrees_with_networkx(g):
    assert is_chordal(len(g), g.edges) == nx.is_chordal(to_nx(len(g), g.edges))


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_greedy_min_fill_matches_naive_recomputation(g):
    order, added = naive_greedy(g, fill_cost)
    cg = extend_greedy_min(g)
    assert list(cg.elimination_order) == order
    assert cg.extension_edges == frozenset(added)


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_min_degree_matches_naive_recomputation(g):
    order, added = naive_greedy(g, degree_cost)
    cg = extend_min_degree(g)
    assert list(cg.elimination_order) == order
    assert cg.extension_edges == frozenset(added)


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_chordal_input_needs_no_fill(g):
    # a chordal graph has a perfect elimination order, and min-fill finds one
    G = to_nx(len(g), g.edges)
    if nx.is_chordal(G):
        assert extend_greedy_min(g).extension_edges == frozenset()


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_maximal_extension_cliques_are_components(g):
    cg = extend_maximal(g)
    comps = sorted(tuple(sorted(c)) for c in nx.connected_components(to_nx(len(g), g.edges)))
    assert sorted(cg.cliques) == comps


def test_cycle_needs_one_chord():
    c4 = Graph.from_positions(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert not is_chordal(4, c4.edges)
    cg = extend_greedy_min(c4)
    assert len(cg.extension_edges) == 1
    assert cg.clique_number() == 3


def test_node_ids_are_preserved():
    g = Graph(["a", "b", "c"], [("a", "b"), ("b", "c")])
    cg = extend_maximal(g)
    assert cg.clique_ids() == [["a", "b", "c"]]
    assert cg.extension_ids() == {("a", "c")}
    assert g.has_edge("c", "b")


@pytest.mark.parametrize("nodes,edges", [
    ([0, 1], [(0, 0)]),
    ([0, 1], [(0, 2)]),
    ([0, 0], []),
])
def test_graph_rejects_bad_input(nodes, edges):
    with pytest.raises(ValueError):
        Graph(nodes, edges)


def test_bad_elimination_order_is_detected():
    c4 = Graph.from_positions(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    with pytest.raises(NotChordalError):
        maximal_cliques(ChordalGraph(c4, frozenset(), (0, 1, 2, 3), ()))


def test_unknown_kind():
    with pytest.raises(ValueError):
        chordal_extension(Graph.from_positions(2, []), "medium")
