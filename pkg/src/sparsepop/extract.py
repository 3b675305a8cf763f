"""Minimizer extraction from order-one moment matrices, and optimality gaps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bench import SplitMix64
from .poly import EQ, Polynomial, POPInstance, unit
from .relax import SDPProblem


@dataclass
class ExtractionResult:
    candidate: list[float] | None
    ranks: list[int]                       # numerical rank of each thresholded M_1(y, I_l)
    ratios: list[float]                    # sigma_2 / sigma_1 of each M_1(y, I_l)
    feasibility: float | None = None       # max violation over all constraints
    objective: float | None = None         # f(candidate)
    bound: float | None = None
    certified: bool = False
    gap: float | None = None               # relative gap in percent
    reason: str = ""
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "candidate": self.candidate, "ranks": self.ranks, "ratios": self.ratios,
            "feasibility": self.feasibility, "objective": self.objective, "bound": self.bound,
            "certified": self.certified, "gap_percent": self.gap, "reason": self.reason,
        }


def first_order_moment_matrix(y: np.ndarray, sdp: SDPProblem, clique) -> np.ndarray | None:
    """M_1(y, I) with rows (1, x_i for i in I); None if a needed moment is missing."""
    n = sdp.pop.n
    basis = [(0,) * n] + [unit(n, i) for i in clique]
    idx = sdp.layout.index
    s = len(basis)
    M = np.empty((s, s))
    for r in range(s):
        for c in range(r, s):
            e = tuple(a + b for a, b in zip(basis[r], basis[c]))
            if sdp.binary:
                e = tuple(a & 1 for a in e)
            if e not in idx:
                return None
            M[r, c] = M[c, r] = y[idx[e]]
    return M


def _components(A: np.ndarray) -> list[list[int]]:
    s = A.shape[0]
    seen = [False] * s
    comps = []
    for st in range(s):
        if seen[st]:
            continue
        stack, comp = [st], []
        seen[st] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in np.flatnonzero(A[v]):
                if w != v and not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        comps.append(sorted(comp))
    return comps


def _signs_from_tree(A: np.ndarray, comp: list[int], root: int) -> dict[int, float]:
    """Signs along a BFS spanning tree of nonzero entries."""
    sign = {root: 1.0}
    queue = [root]
    while queue:
        v = queue.pop(0)
        for w in comp:
            if w not in sign and A[v, w] != 0.0:
                sign[w] = sign[v] * math.copysign(1.0, A[v, w])
                queue.append(w)
    return sign


def _clique_values(M: np.ndarray, rank_tol: float, zero_tol: float):
    """Per-clique analysis: (values by local index, rank, ratio, anchored flags)."""
    A = np.where(np.abs(M) < zero_tol, 0.0, M)
    sv = np.linalg.svd(A, compute_uv=False)
    ratio = float(sv[1] / sv[0]) if len(sv) > 1 and sv[0] > 0 else 0.0
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv[0] > 0 else 0
    values: dict[int, float] = {}
    anchored: dict[int, bool] = {}
    block_rank_one = True
    for comp in _components(A):
        sub = A[np.ix_(comp, comp)]
        csv = np.linalg.svd(sub, compute_uv=False)
        if len(csv) > 1 and csv[0] > 0 and csv[1] / csv[0] >= rank_tol:
            block_rank_one = False
        root = 0 if 0 in comp else comp[0]
        sign = _signs_from_tree(A, comp, root)
        for v in comp:
            if v == 0:
                continue
            values[v] = sign[v] * math.sqrt(max(A[v, v], 0.0))
            anchored[v] = 0 in comp or A[v, v] == 0.0
    return values, rank, ratio, anchored, block_rank_one


def extract_solution(sol, sdp: SDPProblem, rank_tol: float = 1e-3, zero_tol: float = 1e-5,
                     overlap_tol: float = 1e-4, feas_tol: float = 1e-6, gap_tol: float = 1e-4) -> ExtractionResult:
    """Read a candidate minimizer off the order-one moment blocks of ``sol``.

    The point is certified only when every M_1(y, I_l) has numerical rank one,
    the cliques agree on shared variables, and the candidate is feasible with
    objective matching the relaxation bound.
    """
    pop = sdp.pop
    decomp = sdp.decomposition
    y = sol.y
    n = pop.n
    x = [None] * n
    ranks, ratios = [], []
    rank_one = True
    consistent = True
    for clique in decomp.cliques:
        M = first_order_moment_matrix(y, sdp, clique)
        if M is None:
            return ExtractionResult(None, ranks, ratios, bound=sol.objective,
                                    reason="order-one moments missing; assemble with first-order blocks")
        values, rank, ratio, anchored, blocks_ok = _clique_values(M, rank_tol, zero_tol)
        ranks.append(rank)
        ratios.append(ratio)
        rank_one &= rank <= 1 and blocks_ok
        # unanchored components carry a free sign; align them with earlier cliques
        loose = [local for local in values if not anchored[local]]
        if loose:
            disagree = sum(1 for local in loose if x[clique[local - 1]] is not None
                        and x[clique[local - 1]] * values[local] < 0)
            if disagree > 0:
                for local in loose:
                    values[local] = -values[local]
        for local, v in values.items():
            i = clique[local - 1]
            if x[i] is not None and abs(x[i] - v) > overlap_tol:
                consistent = False
            if x[i] is None:
                x[i] = v
    cand = [float(v if v is not None else 0.0) for v in x]
    feas = feasibility(pop, cand)
    fx = pop.objective.evaluate(cand)
    bound = sol.objective
    if pop.sense == "max":
        rel = (bound - fx) / max(1.0, abs(fx))
    else:
        rel = (fx - bound) / max(1.0, abs(fx))
    reasons = []
    if not rank_one:
        reasons.append("moment block rank exceeds one")
    if not consistent:
        reasons.append("cliques disagree on shared variables")
    if feas > feas_tol:
        reasons.append(f"infeasible candidate ({feas:.2e})")
    if rel > gap_tol:
        reasons.append(f"objective gap {rel:.2e}")
    certified = not reasons
    return ExtractionResult(cand, ranks, ratios, feas, fx, bound, certified, 100.0 * rel,
                            "; ".join(reasons) if reasons else "rank one")


def feasibility(pop: POPInstance, x) -> float:
    worst = 0.0
    for c in pop.constraints:
        v = c.poly.evaluate(x)
        worst = max(worst, abs(v) if c.kind == EQ else max(0.0, -v))
    return worst


def optimality_gap(ac: float, opt: float) -> float:
    """(AC - opt) / AC in percent."""
    if ac == 0:
        raise ZeroDivisionError("local value must be nonzero")
    return (ac - opt) / ac * 100.0


def perturb(pop: POPInstance, eps: float = 1e-4, seed: int = 0) -> POPInstance:
    """Add eps * sum c_i x_i with seeded c_i in [0, 1] to break symmetric optima."""
    rng = SplitMix64(seed)
    lin = Polynomial(pop.n, {unit(pop.n, i): eps * rng.uniform() for i in range(pop.n)})
    obj = pop.objective + (lin if pop.sense == "min" else -lin)
    return POPInstance(pop.n, obj, pop.constraints, pop.name + "_perturbed", pop.sense,
                       None, dict(pop.metadata))
