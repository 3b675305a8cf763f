"""Moment-side SDP assembly for the dense, CS, TS and CS-TS hierarchies.

Every PSD block is stored as its upper-triangular entries; each entry is a
linear form over moment variables y_alpha. Layout slot 0 is the constant
y_0 = 1, so "coefficient on slot 0" means a constant term.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chordal import EXTENSIONS, MIN
from .poly import EQ, GEQ, Constraint, Exponent, Polynomial, POPInstance, exp_add, exp_mod2, grlex_key, unit
from .sparsity import (BlockStructure, CliqueDecomposition, decompose, reassign, single_clique,
                       ts_iterate)

HIERARCHIES = ("dense", "cs", "ts", "cstsos")
FIRST_ORDER = -1          # constraint id used for the order-one moment blocks


class MomentLayout:
    """Ordered moment variables, zero exponent first."""

    def __init__(self, exponents):
        exps = sorted(set(exponents), key=grlex_key)
        if not exps or any(exps[0]):
            raise ValueError("layout must contain the zero exponent")
        self.exponents: list[Exponent] = exps
        self.index: dict[Exponent, int] = {a: i for i, a in enumerate(exps)}

    def __len__(self) -> int:
        return len(self.exponents)

    @property
    def n_free(self) -> int:
        return len(self.exponents) - 1


@dataclass
class PSDBlock:
    key: tuple                        # (clique l, constraint j, block index)
    basis: tuple                      # monomial exponents indexing rows/cols
    rows: np.ndarray
    cols: np.ndarray
    slots: np.ndarray                 # layout index (0 = constant)
    coefs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.basis)

    def matrix(self, y: np.ndarray) -> np.ndarray:
        """Evaluate at a full layout vector (y[0] == 1)."""
        s = self.size
        out = np.zeros((s, s))
        np.add.at(out, (self.rows, self.cols), self.coefs * y[self.slots])
        off = self.rows != self.cols
        np.add.at(out, (self.cols[off], self.rows[off]), (self.coefs * y[self.slots])[off])
        return out


@dataclass
class SDPProblem:
    layout: MomentLayout
    objective: np.ndarray             # over layout slots; entry 0 is the constant
    blocks: list[PSDBlock]
    eq_rows: np.ndarray               # equality id per nonzero
    eq_slots: np.ndarray
    eq_coefs: np.ndarray
    n_eq: int
    eq_keys: list = field(default_factory=list)   # (key, row basis, col basis) per equality id
    sense: str = "min"
    provenance: dict = field(default_factory=dict)
    pop: POPInstance | None = None
    structure: BlockStructure | None = None
    decomposition: CliqueDecomposition | None = None
    binary: bool = False

    @property
    def n_vars(self) -> int:
        return self.layout.n_free

    def block_sizes(self) -> list[int]:
        return [b.size for b in self.blocks]

    def equality_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense (E, e) with E y_free = e."""
        E = np.zeros((self.n_eq, len(self.layout)))
        np.add.at(E, (self.eq_rows, self.eq_slots), self.eq_coefs)
        return E[:, 1:], -E[:, 0]


def block_sizes(sdp: SDPProblem) -> list[int]:
    return sdp.block_sizes()


def _entry_forms(basis, gterms, binary: bool):
    """Yield (r, c, exponent, coef) for the upper triangle of a localizing block."""
    for r in range(len(basis)):
        for c in range(r, len(basis)):
            s = exp_add(basis[r], basis[c])
            for alpha, g in gterms:
                e = exp_add(s, alpha)
                yield r, c, (exp_mod2(e) if binary else e), g


def _ball_constraints(pop: POPInstance, decomp: CliqueDecomposition, radius: float) -> list[Constraint]:
    out = []
    for clique in decomp.cliques:
        terms = {(0,) * pop.n: len(clique) * radius ** 2}
        for i in clique:
            terms[unit(pop.n, i, 2)] = -1.0
        out.append(Constraint(Polynomial(pop.n, terms), GEQ))
    return out


def build_structure(pop: POPInstance, d: int, k: int = 1, hierarchy: str = "cstsos", ce: str = MIN,
                    ball: float | None = None, binary: bool = False,
                    check_symmetry: bool = True) -> tuple[POPInstance, BlockStructure]:
    """Decomposition + term-sparsity iteration; returns the (possibly ball-augmented) POP too."""
    if hierarchy not in HIERARCHIES:
        raise ValueError(f"unknown hierarchy {hierarchy!r}")
    if d < pop.d_min:
        raise ValueError(f"relaxation order {d} below minimum {pop.d_min}")
    if hierarchy in ("ts", "cstsos") and k < 1:
        raise ValueError("sparse order must be >= 1")
    decomp = decompose(pop) if hierarchy in ("cs", "cstsos") else single_clique(pop)
    if ball is not None:
        pop = pop.with_constraints(_ball_constraints(pop, decomp, ball))
        decomp = reassign(pop, decomp)
    ts = hierarchy in ("ts", "cstsos")
    bs = ts_iterate(pop, decomp, d, k if ts else 0, ce, binary=binary, term_sparsity=ts,
                    check_symmetry=check_symmetry)
    return pop, bs


def assemble_structure(pop: POPInstance, bs: BlockStructure, first_order_blocks: bool = False,
                       provenance: dict | None = None) -> SDPProblem:
    binary = bs.binary
    f = pop.minimization_objective()
    if binary:
        f = f.reduce_binary()
    decomp = bs.decomposition
    n = pop.n

    raw_blocks = []       # (key, basis, entries, kind)
    for (l, j) in bs.keys():
        tg = bs.graphs[(l, j)]
        if j == 0:
            gterms = [((0,) * n, 1.0)]
        else:
            g = pop.constraints[j - 1].poly
            gterms = list((g.reduce_binary() if binary else g).items())
        for b, clique in enumerate(tg.blocks):
            basis = tuple(tg.basis.exponents[i] for i in clique)
            raw_blocks.append(((l, j, b), basis, list(_entry_forms(basis, gterms, binary)), tg.kind))
    if first_order_blocks:
        for l, clique in enumerate(decomp.cliques):
            basis = ((0,) * n,) + tuple(unit(n, i) for i in clique)
            raw_blocks.append(((l, FIRST_ORDER, 0), basis,
                               list(_entry_forms(basis, [((0,) * n, 1.0)], binary)), "obj"))

    exps = set(bs.support) | {(0,) * n} | set(f.support())
    for _, _, entries, _ in raw_blocks:
        exps.update(e for _, _, e, _ in entries)
    layout = MomentLayout(exps)
    idx = layout.index

    c = np.zeros(len(layout))
    for alpha, coef in f.items():
        c[idx[alpha]] += coef

    blocks: list[PSDBlock] = []
    eq_r, eq_s, eq_c, eq_keys = [], [], [], []
    n_eq = 0
    for key, basis, entries, kind in raw_blocks:
        if kind == EQ:
            rowmap: dict[tuple[int, int], int] = {}
            for r, cc, e, g in entries:
                if (r, cc) not in rowmap:
                    rowmap[(r, cc)] = n_eq
                    eq_keys.append((key, basis[r], basis[cc]))
                    n_eq += 1
                eq_r.append(rowmap[(r, cc)])
                eq_s.append(idx[e])
                eq_c.append(g)
            continue
        rows = np.array([t[0] for t in entries], dtype=np.int64)
        cols = np.array([t[1] for t in entries], dtype=np.int64)
        slots = np.array([idx[t[2]] for t in entries], dtype=np.int64)
        coefs = np.array([t[3] for t in entries], dtype=float)
        blocks.append(PSDBlock(key, basis, rows, cols, slots, coefs))

    blocks.sort(key=lambda b: b.key)
    prov = {"hierarchy": None, "order": bs.order, "sparse_order": bs.sparse_order,
            "ce": bs.extension, "binary": binary, "first_order_blocks": first_order_blocks}
    prov.update(provenance or {})
    return SDPProblem(layout, c, blocks, np.array(eq_r, dtype=np.int64), np.array(eq_s, dtype=np.int64),
                      np.array(eq_c, dtype=float), n_eq, eq_keys, pop.sense, prov, pop, bs, decomp, binary)


def assemble(pop: POPInstance, d: int, k: int = 1, hierarchy: str = "cstsos", ce: str = MIN,
             first_order_blocks: bool = False, ball: float | None = None,
             binary: bool = False) -> SDPProblem:
    """Build the moment relaxation of order d (sparse order k) for ``pop``."""
    if ce not in EXTENSIONS:
        raise ValueError(f"unknown chordal extension kind {ce!r}")
    pop2, bs = build_structure(pop, d, k, hierarchy, ce, ball, binary)
    return assemble_structure(pop2, bs, first_order_blocks, {"hierarchy": hierarchy})
