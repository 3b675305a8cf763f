"""Undirected graphs, chordal extensions and maximal cliques of chordal graphs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

Node = Hashable

MAX = "max"
MIN = "min"              # greedy minimum degree
MINFILL = "minfill"      # greedy minimum fill
EXTENSIONS = (MAX, MIN, MINFILL)


class NotChordalError(ValueError):
    pass


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph. Nodes keep their insertion order, which is the
    "node index" used for every tie-break in this module."""

    nodes: tuple
    edges: frozenset = frozenset()
    _pos: dict = field(default=None, repr=False, compare=False)

    def __init__(self, nodes: Iterable[Node], edges: Iterable[tuple[Node, Node]] = ()):
        nodes = tuple(nodes)
        pos = {v: i for i, v in enumerate(nodes)}
        if len(pos) != len(nodes):
            raise ValueError("duplicate node ids")
        canon = set()
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            if a not in pos or b not in pos:
                raise ValueError(f"edge ({a!r}, {b!r}) references unknown node")
            canon.add(_pair(pos[a], pos[b]))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "_pos", pos)
        # edges are stored as position pairs (i < j)
        object.__setattr__(self, "edges", frozenset(canon))

    @classmethod
    def from_positions(cls, n_nodes: int, edges: Iterable[tuple[int, int]]) -> Graph:
        return cls(range(n_nodes), edges)

    def __len__(self) -> int:
        return len(self.nodes)

    def index(self, v: Node) -> int:
        return self._pos[v]

    def edge_ids(self) -> set[tuple[Node, Node]]:
        return {(self.nodes[i], self.nodes[j]) for i, j in self.edges}

    def has_edge(self, a: Node, b: Node) -> bool:
        return _pair(self._pos[a], self._pos[b]) in self.edges

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in self.nodes]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def components(self) -> list[list[int]]:
        """Connected components as sorted position lists, ordered by first node."""
        adj = self.adjacency()
        seen = [False] * len(self.nodes)
        comps = []
        for s in range(len(self.nodes)):
            if seen[s]:
                continue
            stack, comp = [s], []
            seen[s] = True
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        stack.append(w)
            comps.append(sorted(comp))
        return comps


@dataclass(frozen=True)
class ChordalGraph:
    base: Graph
    extension_edges: frozenset          # position pairs added to base
    elimination_order: tuple            # perfect elimination ordering (positions)
    cliques: tuple                      # maximal cliques, sorted position tuples

    @property
    def edges(self) -> frozenset:
        return self.base.edges | self.extension_edges

    @property
    def nodes(self) -> tuple:
        return self.base.nodes

    def graph(self) -> Graph:
        return Graph(self.base.nodes, ((self.base.nodes[i], self.base.nodes[j]) for i, j in self.edges))

    def clique_ids(self) -> list[list[Node]]:
        return [[self.base.nodes[i] for i in c] for c in self.cliques]

    def clique_number(self) -> int:
        return max((len(c) for c in self.cliques), default=0)

    def extension_ids(self) -> set[tuple[Node, Node]]:
        return {(self.base.nodes[i], self.base.nodes[j]) for i, j in self.extension_edges}


def _cliques_from_order(n: int, edges: Iterable[tuple[int, int]], order: Sequence[int]) -> list[tuple[int, ...]]:
    """Maximal cliques of a chordal graph given a perfect elimination ordering."""
    adj: list[set[int]] = [set() for _ in range(n)]
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    rank = {v: k for k, v in enumerate(order)}
    if len(rank) != n:
        raise NotChordalError("elimination ordering is not a permutation of the nodes")
    candidates = []
    for v in order:
        later = {w for w in adj[v] if rank[w] > rank[v]}
        if later:
            # PEO check: v's earliest later neighbour must see all other later neighbours
            u = min(later, key=rank.__getitem__)
            if not (later - {u}) <= adj[u]:
                raise NotChordalError("ordering is not a perfect elimination ordering")
        candidates.append(frozenset(later | {v}))
    # keep only inclusion-maximal candidates
    candidates.sort(key=len, reverse=True)
    kept: list[frozenset] = []
    for c in candidates:
        if not any(c <= k for k in kept):
            kept.append(c)
    return sorted(tuple(sorted(c)) for c in kept)


def maximal_cliques(cg: ChordalGraph) -> list[tuple[int, ...]]:
    """All maximal cliques (as sorted position tuples, sorted lexicographically).

    Recomputed from the stored elimination ordering; raises NotChordalError if
    that ordering is not perfect for the extended graph.
    """
    return _cliques_from_order(len(cg.base), cg.edges, cg.elimination_order)


def extend_maximal(g: Graph) -> ChordalGraph:
    """Complete every connected component; cliques are the components."""
    added = set()
    for comp in g.components():
        for a in range(len(comp)):
            for b in range(a + 1, len(comp)):
                p = (comp[a], comp[b])
                if p not in g.edges:
                    added.add(p)
    order = tuple(range(len(g)))
    cliques = tuple(sorted(tuple(c) for c in g.components()))
    return ChordalGraph(g, frozenset(added), order, cliques)


def _fill_count(adj: list[set[int]], v: int) -> int:
    nb = sorted(adj[v])
    missing = 0
    for a in range(len(nb)):
        na = adj[nb[a]]
        for b in range(a + 1, len(nb)):
            if nb[b] not in na:
                missing += 1
    return missing


def extend_greedy_min(g: Graph) -> ChordalGraph:
    """Greedy minimum-fill elimination (ties -> smallest node position)."""
    n = len(g)
    adj = g.adjacency()
    alive = set(range(n))
    fill = [_fill_count(adj, v) for v in range(n)]
    order: list[int] = []
    added: set[tuple[int, int]] = set()
    while alive:
        v = min(alive, key=lambda u: (fill[u], u))
        nb = sorted(adj[v])
        touched = set(nb)
        for a in range(len(nb)):
            for b in range(a + 1, len(nb)):
                x, y = nb[a], nb[b]
                if y not in adj[x]:
                    adj[x].add(y)
                    adj[y].add(x)
                    added.add((x, y))
                    touched |= adj[x] & adj[y]
        for w in nb:
            adj[w].discard(v)
        adj[v] = set()
        alive.discard(v)
        order.append(v)
        for w in touched:
            if w in alive:
                fill[w] = _fill_count(adj, w)
    cg_edges = g.edges | added
    cliques = _cliques_from_order(n, cg_edges, order)
    return ChordalGraph(g, frozenset(added - g.edges), tuple(order), tuple(cliques))


def extend_min_degree(g: Graph) -> ChordalGraph:
    """Greedy minimum-degree elimination (ties -> smallest node position)."""
    n = len(g)
    adj = g.adjacency()
    alive = set(range(n))
    order: list[int] = []
    added: set[tuple[int, int]] = set()
    while alive:
        v = min(alive, key=lambda u: (len(adj[u]), u))
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
    cliques = _cliques_from_order(n, g.edges | added, order)
    return ChordalGraph(g, frozenset(added - g.edges), tuple(order), tuple(cliques))


def chordal_extension(g: Graph, kind: str) -> ChordalGraph:
    """Chordal extension of kind "max" (complete components), "min" (greedy
    minimum degree) or "minfill" (greedy minimum fill)."""
    if kind == MAX:
        return extend_maximal(g)
    if kind == MIN:
        return extend_min_degree(g)
    if kind == MINFILL:
        return extend_greedy_min(g)
    raise ValueError(f"unknown chordal extension kind {kind!r}")


def is_chordal(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    """Independent check: repeatedly strip simplicial vertices."""
    adj: list[set[int]] = [set() for _ in range(n)]
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    alive = set(range(n))
    while alive:
        for v in sorted(alive):
            nb = list(adj[v])
            if all(nb[b] in adj[nb[a]] for a in range(len(nb)) for b in range(a + 1, len(nb))):
                break
        else:
            return False
        for w in adj[v]:
            adj[w].discard(v)
        alive.discard(v)
    return True
