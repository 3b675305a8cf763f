"""GF(2) linear algebra on int bitsets (bit i <-> coordinate i)."""
from __future__ import annotations

from typing import Iterable, Sequence


def to_bits(vec: Sequence[int]) -> int:
    out = 0
    for i, v in enumerate(vec):
        if v & 1:
            out |= 1 << i
    return out


def from_bits(bits: int, n: int) -> tuple[int, ...]:
    return tuple((bits >> i) & 1 for i in range(n))


def rref(rows: Iterable[int], n: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form; returns (rows, pivot columns), pivots ascending."""
    work = [r for r in rows if r]
    out: list[int] = []
    pivots: list[int] = []
    for col in range(n):
        bit = 1 << col
        hit = next((k for k, r in enumerate(work) if r & bit), None)
        if hit is None:
            continue
        prow = work.pop(hit)
        work = [r ^ prow if r & bit else r for r in work]
        out = [r ^ prow if r & bit else r for r in out]
        out.append(prow)
        pivots.append(col)
        work = [r for r in work if r]
    return out, pivots


def rank(rows: Iterable[int], n: int) -> int:
    return len(rref(rows, n)[1])


def nullspace(rows: Iterable[int], n: int) -> list[int]:
    """Basis (in reduced row echelon form) of {r : r.row = 0 mod 2 for all rows}."""
    reduced, pivots = rref(rows, n)
    pivot_of = dict(zip(pivots, reduced))
    basis = []
    for free in range(n):
        if free in pivot_of:
            continue
        v = 1 << free
        for p, row in pivot_of.items():
            if (row >> free) & 1:
                v |= 1 << p
        basis.append(v)
    return rref(basis, n)[0]


def in_span(vec: int, rows: Iterable[int], n: int) -> bool:
    rows = list(rows)
    return rank(rows + [vec], n) == rank(rows, n)


def dot(a: int, b: int) -> int:
    return bin(a & b).count("1") & 1
