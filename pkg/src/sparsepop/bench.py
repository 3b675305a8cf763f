"""Benchmark problem families and brute-force oracles."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

from .poly import EQ, GEQ, Constraint, Polynomial, POPInstance, save_pop, unit

FAMILIES = ("broyden_banded", "gen_rosenbrock", "broyden_tridiagonal", "chained_wood", "maxcut_blockband")
MASK64 = (1 << 64) - 1


class SplitMix64:
    """Portable 64-bit generator; identical streams on every platform."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class BenchSpec:
    family: str
    n: int = 0
    l: int = 0
    b: int = 0
    h: int = 0
    seed: int = 0
    spheres: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "maxcut_blockband":
            if self.l < 1 or self.b < 1 or self.h < 0:
                raise ValueError("maxcut requires l >= 1, b >= 1, h >= 0")
            return
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.family == "chained_wood" and self.n % 4:
            raise ValueError("chained_wood requires 4 | n")
        if self.spheres and self.n % 20:
            raise ValueError("sphere constraints require 20 | n")


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    edges: tuple[tuple[int, int, float], ...]     # (i, j, w) with i < j, sorted

    def to_pop(self, name: str = "maxcut") -> POPInstance:
        return maxcut_pop(self, name)

    def edge_list(self) -> str:
        return "".join(f"{i + 1} {j + 1} {w:g}\n" for i, j, w in self.edges)

    def digest(self) -> str:
        return hashlib.sha256(f"{self.n}\n{self.edge_list()}".encode()).hexdigest()


def _vars(n: int) -> list[Polynomial]:
    return [Polynomial.variable(n, i) for i in range(n)]


def broyden_banded(n: int) -> POPInstance:
    x = _vars(n)
    f = Polynomial(n)
    for i in range(n):
        inner = x[i] * (2 + 5 * x[i] ** 2) + 1
        for j in range(max(0, i - 5), min(n - 1, i + 1) + 1):
            if j != i:
                inner = inner - (1 + x[j]) * x[j]
        f = f + inner ** 2
    return POPInstance(n, f, name=f"broyden_banded_{n}")


def gen_rosenbrock_objective(n: int) -> Polynomial:
    x = _vars(n)
    f = Polynomial.constant(n, 1.0)
    for i in range(1, n):
        f = f + 100 * (x[i] - x[i - 1] ** 2) ** 2 + (1 - x[i]) ** 2
    return f


def broyden_tridiagonal_objective(n: int) -> Polynomial:
    x = _vars(n)
    f = ((3 - 2 * x[0]) * x[0] - 2 * x[1] + 1) ** 2
    for i in range(1, n - 1):
        f = f + ((3 - 2 * x[i]) * x[i] - x[i - 1] - 2 * x[i + 1] + 1) ** 2
    f = f + ((3 - 2 * x[n - 1]) * x[n - 1] - x[n - 2] + 1) ** 2
    return f


def chained_wood_objective(n: int) -> Polynomial:
    x = _vars(n)
    f = Polynomial.constant(n, 1.0)
    for i in range(0, n - 3, 2):
        f = (f + 100 * (x[i + 1] - x[i] ** 2) ** 2 + (1 - x[i]) ** 2
             + 90 * (x[i + 3] - x[i + 2] ** 2) ** 2 + (1 - x[i + 2]) ** 2
             + 10 * (x[i + 1] + x[i + 3] - 2) ** 2 + 0.1 * (x[i + 1] - x[i + 3]) ** 2)
    return f


def sphere_constraints(n: int) -> tuple[Constraint, ...]:
    """1 - sum of squares over consecutive groups of 20 variables."""
    out = []
    for start in range(0, n, 20):
        terms = {(0,) * n: 1.0}
        for i in range(start, start + 20):
            terms[unit(n, i, 2)] = -1.0
        out.append(Constraint(Polynomial(n, terms), GEQ))
    return tuple(out)


def maxcut_blockband(l: int, b: int, h: int, seed: int) -> WeightedGraph:
    """Random block-arrow graph: l diagonal blocks of size b plus h dense border nodes.

    Upper-triangle pattern entries are visited row-major; a block entry is an
    edge with probability 0.16, a band entry with probability min(1, 2/sqrt(l)).
    Then one draw per edge (sorted order) picks the weight +1 or -1.
    """
    rng = SplitMix64(seed)
    nodes = l * b + h
    p_band = min(1.0, 2.0 / math.sqrt(l))
    pairs = []
    for i in range(nodes):
        for j in range(i + 1, nodes):
            if j >= l * b:
                p = p_band
            elif i // b == j // b:
                p = 0.16
            else:
                continue
            if rng.uniform() < p:
                pairs.append((i, j))
    edges = tuple((i, j, 1.0 if rng.next_u64() >> 63 == 0 else -1.0) for i, j in pairs)
    return WeightedGraph(nodes, edges)


def maxcut_pop(g: WeightedGraph, name: str = "maxcut") -> POPInstance:
    """max 1/2 sum w_ij (1 - x_i x_j) subject to x_i^2 = 1."""
    n = g.n
    terms: dict = {}
    zero = (0,) * n
    for i, j, w in g.edges:
        terms[zero] = terms.get(zero, 0.0) + 0.5 * w
        e = tuple(1 if t in (i, j) else 0 for t in range(n))
        terms[e] = terms.get(e, 0.0) - 0.5 * w
    f = Polynomial(n, terms)
    cons = tuple(Constraint(Polynomial(n, {zero: 1.0, unit(n, i, 2): -1.0}), EQ) for i in range(n))
    return POPInstance(n, f, cons, name=name, sense="max", metadata={"edges": len(g.edges)})


def brute_force_maxcut(g: WeightedGraph) -> float:
    """Exact max cut by Gray-code enumeration (node 0 fixed on one side)."""
    n = g.n
    if n > 24:
        raise ValueError("brute force limited to 24 nodes")
    if n <= 1 or not g.edges:
        return 0.0
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for i, j, w in g.edges:
        adj[i].append((j, w))
        adj[j].append((i, w))
    side = [0] * n
    cut = 0.0
    best = 0.0
    for t in range(1, 1 << (n - 1)):
        v = (t & -t).bit_length()        # flip node v (1..n-1)
        # edges to the same side become cut and vice versa
        for u, w in adj[v]:
            cut += w if side[u] == side[v] else -w
        side[v] ^= 1
        best = max(best, cut)
    return best


def generate(spec: BenchSpec) -> POPInstance | WeightedGraph:
    if spec.family == "maxcut_blockband":
        return maxcut_blockband(spec.l, spec.b, spec.h, spec.seed)
    n = spec.n
    if spec.family == "broyden_banded":
        pop = broyden_banded(n)
    else:
        objective = {"gen_rosenbrock": gen_rosenbrock_objective,
                     "broyden_tridiagonal": broyden_tridiagonal_objective,
                     "chained_wood": chained_wood_objective}[spec.family](n)
        pop = POPInstance(n, objective, name=f"{spec.family}_{n}")
    if spec.spheres:
        pop = POPInstance(n, pop.objective, sphere_constraints(n), name=pop.name + "_spheres")
    return pop


def write_instance(obj: POPInstance | WeightedGraph, path) -> None:
    if isinstance(obj, WeightedGraph):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(obj.edge_list())
    else:
        save_pop(obj, path)


def cut_value(g: WeightedGraph, x: Sequence[int]) -> float:
    return sum(0.5 * w * (1 - x[i] * x[j]) for i, j, w in g.edges)
