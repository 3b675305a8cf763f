"""Correlative sparsity (variable cliques) and term sparsity (monomial blocks).

The term-sparsity graphs are iterated jointly over all cliques: every round
first collects the global support set from all current graphs, then grows each
graph by support extension and closes it under a chordal extension.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations

from . import gf2
from .chordal import EXTENSIONS, MAX, MIN, ChordalGraph, Graph, chordal_extension, extend_greedy_min
from .poly import Exponent, POPInstance, exp_add, exp_mod2, exp_support, grlex_key, monomial_basis

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- csp graph

def build_csp_graph(pop: POPInstance) -> Graph:
    """Variables i, j are adjacent if they share an objective monomial or a constraint."""
    edges = set()
    for alpha in pop.objective.support():
        s = sorted(exp_support(alpha))
        edges.update(combinations(s, 2))
    for c in pop.constraints:
        edges.update(combinations(sorted(c.poly.variables()), 2))
    return Graph(range(pop.n), edges)


@dataclass(frozen=True)
class CliqueDecomposition:
    cliques: tuple[tuple[int, ...], ...]        # I_1..I_p, sorted variable indices
    assignment: tuple[tuple[int, ...], ...]     # J_1..J_p, 1-based constraint indices
    csp: ChordalGraph | None = None

    @property
    def p(self) -> int:
        return len(self.cliques)

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.cliques]

    def clique_of(self, j: int) -> int:
        for l, J in enumerate(self.assignment):
            if j in J:
                return l
        raise KeyError(j)


def _assign_constraints(pop: POPInstance, cliques) -> tuple[tuple[int, ...], ...]:
    sets = [set(c) for c in cliques]
    buckets: list[list[int]] = [[] for _ in cliques]
    for j, c in enumerate(pop.constraints, start=1):
        v = c.poly.variables()
        hosts = [l for l, s in enumerate(sets) if v <= s]
        if not hosts:
            raise RuntimeError(f"constraint {j} fits in no variable clique")
        # smallest hosting clique, then lowest index
        buckets[min(hosts, key=lambda l: (len(sets[l]), l))].append(j)
    return tuple(tuple(b) for b in buckets)


def decompose(pop: POPInstance, extension: str = MIN) -> CliqueDecomposition:
    """Variable cliques of a chordal extension of the csp graph.

    The csp graph is extended with greedy minimum fill unless ``extension`` is
    ``"dense"``, which returns the single clique of all variables.
    """
    if extension == "dense":
        return single_clique(pop)
    csp = build_csp_graph(pop)
    cg = extend_greedy_min(csp)
    cliques = tuple(tuple(c) for c in cg.cliques)
    return CliqueDecomposition(cliques, _assign_constraints(pop, cliques), cg)


def reassign(pop: POPInstance, decomp: CliqueDecomposition) -> CliqueDecomposition:
    """Same cliques, constraints of ``pop`` (possibly extended) assigned afresh."""
    return CliqueDecomposition(decomp.cliques, _assign_constraints(pop, decomp.cliques), decomp.csp)


def single_clique(pop: POPInstance) -> CliqueDecomposition:
    return CliqueDecomposition((tuple(range(pop.n)),), (tuple(range(1, pop.m + 1)),), None)


# ---------------------------------------------------------------- sign symmetries

@dataclass(frozen=True)
class SignSymmetryBasis:
    n: int
    vectors: tuple[tuple[int, ...], ...]

    @property
    def bits(self) -> list[int]:
        return [gf2.to_bits(v) for v in self.vectors]

    def respects(self, alpha: Exponent) -> bool:
        a = gf2.to_bits(alpha)
        return all(gf2.dot(r, a) == 0 for r in self.bits)


def sign_symmetries(A, n: int | None = None) -> SignSymmetryBasis:
    """Canonical GF(2) basis of the sign symmetries {r : r.alpha even, alpha in A}."""
    A = list(A)
    if n is None:
        if not A:
            raise ValueError("cannot infer arity from an empty support")
        n = len(A[0])
    rows = [gf2.to_bits(a) for a in A]
    return SignSymmetryBasis(n, tuple(gf2.from_bits(v, n) for v in gf2.nullspace(rows, n)))


# ---------------------------------------------------------------- term sparsity

@dataclass(frozen=True)
class MonomialBasis:
    clique: int
    constraint: int                  # 0 = objective, j >= 1 = constraint j
    exponents: tuple[Exponent, ...]

    def __len__(self) -> int:
        return len(self.exponents)


def clique_basis(n: int, clique, order: int, binary: bool = False) -> list[Exponent]:
    return monomial_basis(n, order, clique, square_free=binary)


def initial_tsp_graph(Al, basis: MonomialBasis | list[Exponent], binary: bool = False) -> Graph:
    """Edge {b, c} iff b + c lies in Al or is even (all-zero after reduction in binary mode)."""
    exps = basis.exponents if isinstance(basis, MonomialBasis) else tuple(basis)
    Al = {exp_mod2(a) for a in Al} if binary else set(Al)
    edges = []
    for a in range(len(exps)):
        for b in range(a + 1, len(exps)):
            s = exp_add(exps[a], exps[b])
            if binary:
                s = exp_mod2(s)
                ok = s in Al or not any(s)
            else:
                ok = s in Al or all(x % 2 == 0 for x in s)
            if ok:
                edges.append((a, b))
    return Graph.from_positions(len(exps), edges)


@dataclass
class TermGraph:
    """Term-sparsity graph chain state for one (clique, constraint) pair."""

    basis: MonomialBasis
    gsupp: tuple[Exponent, ...]      # support of g_j (after binary reduction)
    kind: str                        # "geq0" / "eq0" / "obj"
    chordal: ChordalGraph
    edge_history: list[int] = field(default_factory=list)

    @property
    def blocks(self) -> list[tuple[int, ...]]:
        return list(self.chordal.cliques)

    @property
    def edges(self) -> frozenset:
        return self.chordal.edges


@dataclass
class BlockStructure:
    n: int
    order: int
    sparse_order: int
    extension: str
    decomposition: CliqueDecomposition
    graphs: dict                     # (l, j) -> TermGraph
    support: set                     # global support set C
    stabilized: bool
    binary: bool = False
    term_sparsity: bool = True
    symmetry: SignSymmetryBasis | None = None

    def keys(self):
        return sorted(self.graphs)

    def block_sizes(self) -> list[int]:
        return [len(b) for key in self.keys() for b in self.graphs[key].blocks]

    def report(self) -> dict:
        out = {
            "order": self.order, "sparse_order": self.sparse_order, "extension": self.extension,
            "binary": self.binary, "stabilized": self.stabilized, "support_size": len(self.support),
            "cliques": [list(c) for c in self.decomposition.cliques],
            "graphs": [],
        }
        for (l, j) in self.keys():
            tg = self.graphs[(l, j)]
            out["graphs"].append({
                "clique": l, "constraint": j, "basis_size": len(tg.basis),
                "edges": len(tg.edges), "block_sizes": [len(b) for b in tg.blocks],
                "edge_history": list(tg.edge_history),
            })
        return out

    def dump_json(self) -> str:
        return json.dumps(self.report(), indent=2)


def _reduce(e: Exponent, binary: bool) -> Exponent:
    return exp_mod2(e) if binary else e


def _graph_support(tg: TermGraph, binary: bool, diagonals: bool) -> set[Exponent]:
    exps = tg.basis.exponents
    out = set()
    pairs = list(tg.edges)
    if diagonals:
        pairs += [(a, a) for a in range(len(exps))]
    for a, b in pairs:
        s = exp_add(exps[a], exps[b])
        for g in tg.gsupp:
            out.add(_reduce(exp_add(s, g), binary))
    return out


def global_support(graphs: dict, binary: bool, constraint_diagonals: bool = True) -> set[Exponent]:
    """Union over all (l, j) of supp(g_j) + supp(G_{l,j}), diagonals included.

    Objective graphs always contribute their diagonal entries; constraint
    graphs only once they have gone through at least one round.
    """
    C: set[Exponent] = set()
    for (l, j), tg in graphs.items():
        C |= _graph_support(tg, binary, diagonals=(j == 0 or constraint_diagonals))
    return C


def _support_extension(tg: TermGraph, C: set[Exponent], binary: bool) -> set[tuple[int, int]]:
    exps = tg.basis.exponents
    edges = set(tg.edges)
    for a in range(len(exps)):
        for b in range(a + 1, len(exps)):
            if (a, b) in edges:
                continue
            s = exp_add(exps[a], exps[b])
            if any(_reduce(exp_add(s, g), binary) in C for g in tg.gsupp):
                edges.add((a, b))
    return edges


def _complete(nnodes: int) -> set[tuple[int, int]]:
    return set(combinations(range(nnodes), 2))


def _local_polys(pop: POPInstance, binary: bool):
    f = pop.minimization_objective()
    gs = [c.poly for c in pop.constraints]
    if binary:
        f = f.reduce_binary()
        gs = [g.reduce_binary() for g in gs]
    return f, gs


def ts_iterate(pop: POPInstance, decomp: CliqueDecomposition, d: int, k: int, ce: str = MAX,
               binary: bool = False, term_sparsity: bool = True,
               check_symmetry: bool = True) -> BlockStructure:
    """Run k rounds of support extension + chordal extension on every (l, j) graph.

    With ``term_sparsity=False`` every graph is complete (the dense / correlative
    sparsity special cases) and no iteration takes place.
    """
    if d < pop.d_min:
        raise ValueError(f"relaxation order {d} below minimum {pop.d_min}")
    if term_sparsity and k < 1:
        raise ValueError("sparse order must be >= 1")
    if ce not in EXTENSIONS:
        raise ValueError(f"unknown chordal extension kind {ce!r}")
    f, gs = _local_polys(pop, binary)
    n = pop.n
    A = f.support()
    for g in gs:
        A |= g.support()
    half = pop.constraint_half_degrees

    graphs: dict[tuple[int, int], TermGraph] = {}
    for l, clique in enumerate(decomp.cliques):
        cset = set(clique)
        basis0 = MonomialBasis(l, 0, tuple(clique_basis(n, clique, d, binary)))
        if term_sparsity:
            Al = [a for a in A if exp_support(a) <= cset]
            g0 = initial_tsp_graph(Al, basis0, binary)
        else:
            g0 = Graph.from_positions(len(basis0), _complete(len(basis0)))
        zero = (0,) * n
        graphs[(l, 0)] = TermGraph(basis0, (zero,), "obj", chordal_extension(g0, MAX) if not term_sparsity
                                   else ChordalGraph(g0, frozenset(), tuple(range(len(basis0))), ()))
        for j in decomp.assignment[l]:
            g = gs[j - 1]
            if g.is_zero():
                # trivially satisfied after binary reduction
                continue
            basis = MonomialBasis(l, j, tuple(clique_basis(n, clique, d - half[j - 1], binary)))
            nodes = len(basis)
            edges = set() if term_sparsity else _complete(nodes)
            gr = Graph.from_positions(nodes, edges)
            cg = chordal_extension(gr, MAX) if not term_sparsity else ChordalGraph(gr, frozenset(), tuple(range(nodes)), ())
            graphs[(l, j)] = TermGraph(basis, tuple(sorted(g.support(), key=grlex_key)),
                                       pop.constraints[j - 1].kind, cg)

    R = sign_symmetries(A, n) if A else SignSymmetryBasis(n, tuple(gf2.from_bits(1 << i, n) for i in range(n)))
    if not term_sparsity:
        C = global_support(graphs, binary)
        for tg in graphs.values():
            tg.edge_history.append(len(tg.edges))
        # complete graphs carry R-odd entries; R still constrains optimal Gram supports
        return BlockStructure(n, d, 0, ce, decomp, graphs, C, True, binary, False, R)

    stabilized = False
    for rnd in range(1, k + 1):
        C = global_support(graphs, binary, constraint_diagonals=rnd > 1)
        changed = False
        for key in sorted(graphs):
            tg = graphs[key]
            F = _support_extension(tg, C, binary)
            if F != set(tg.edges) or rnd == 1:
                cg = chordal_extension(Graph.from_positions(len(tg.basis), F), ce)
                changed |= cg.edges != tg.edges
                tg.chordal = cg
            tg.edge_history.append(len(tg.edges))
        log.debug("round %d: changed=%s", rnd, changed)

    C = global_support(graphs, binary, constraint_diagonals=True)
    # look-ahead: the chain is stable at k when one more round adds no edge
    stabilized = all(_support_extension(tg, C, binary) == set(tg.edges) for tg in graphs.values())

    if check_symmetry:
        bad = [a for a in C if not R.respects(a)]
        if bad:
            raise RuntimeError(f"support set violates sign symmetries at {bad[:3]}")
    return BlockStructure(n, d, k, ce, decomp, graphs, C, stabilized, binary, True, R)


def iterate_to_stabilization(pop: POPInstance, decomp: CliqueDecomposition, d: int, ce: str = MAX,
                             binary: bool = False, max_rounds: int = 100) -> BlockStructure:
    """Smallest k whose structure is a fixed point of the iteration."""
    for k in range(1, max_rounds + 1):
        bs = ts_iterate(pop, decomp, d, k, ce, binary)
        if bs.stabilized:
            return bs
    raise RuntimeError(f"no stabilization within {max_rounds} rounds")
