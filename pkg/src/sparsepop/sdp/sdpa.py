"""SDPA sparse (.dat-s) export/import and SDPA output parsing.

SDPA's primal form is  min c'x  s.t.  F_1 x_1 + ... + F_m x_m - F_0 >= 0,
which matches the moment problem with F_i = G_i and F_0 = -G_0 after the
equality constraints have been eliminated from the moment vector.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass

import numpy as np

from ..relax import SDPProblem
from .ipm import affine_moments, block_operators


class SDPAFormatError(ValueError):
    pass


@dataclass
class SDPAData:
    m: int
    block_sizes: list[int]
    c: list[float]
    entries: list[tuple[int, int, int, int, float]]     # (mat, block, i, j) 1-based, i <= j
    constant: float = 0.0
    comments: tuple[str, ...] = ()

    def sorted_entries(self) -> list[tuple[int, int, int, int, float]]:
        return sorted(self.entries, key=lambda e: e[:4])

    def same_structure(self, other: SDPAData) -> bool:
        return (self.m == other.m and self.block_sizes == other.block_sizes and self.c == other.c
                and self.sorted_entries() == other.sorted_entries() and self.constant == other.constant)


def _fmt(v: float) -> str:
    # shortest repr that round-trips exactly
    return repr(float(v))


def to_sdpa(sdp: SDPProblem) -> SDPAData:
    """Canonical SDPA data: blocks in problem order, entries (mat, block, i, j)-sorted."""
    y0, T, infeas = affine_moments(sdp)
    if infeas > 1e-8:
        raise ValueError("equality constraints are inconsistent; nothing to export")
    m = T.shape[1]
    entries = []
    for bno, (blk, op) in enumerate(zip(sdp.blocks, block_operators(sdp)), start=1):
        s = blk.size
        const = op @ y0
        lin = (op @ T).tocsr()
        for r in range(s):
            for c in range(r, s):
                k = r * s + c
                if const[k] != 0.0:
                    entries.append((0, bno, r + 1, c + 1, -float(const[k])))
                lo, hi = lin.indptr[k], lin.indptr[k + 1]
                for var, val in zip(lin.indices[lo:hi], lin.data[lo:hi]):
                    if val != 0.0:
                        entries.append((int(var) + 1, bno, r + 1, c + 1, float(val)))
    entries.sort(key=lambda e: e[:4])
    c = np.asarray(T.T @ sdp.objective).ravel()
    constant = float(sdp.objective @ y0)
    return SDPAData(m, sdp.block_sizes(), [float(v) for v in c], entries, constant)


def format_sdpa(data: SDPAData) -> str:
    out = io.StringIO()
    if data.constant != 0.0:
        out.write(f'"objective constant = {_fmt(data.constant)}\n')
    out.write(f"{data.m}\n{len(data.block_sizes)}\n")
    out.write(" ".join(str(s) for s in data.block_sizes) + "\n")
    out.write(" ".join(_fmt(v) for v in data.c) + "\n")
    for mat, blk, i, j, v in data.sorted_entries():
        out.write(f"{mat} {blk} {i} {j} {_fmt(v)}\n")
    return out.getvalue()


def export_sdpa(sdp: SDPProblem, destination) -> str:
    """Write ``sdp`` to a path or text stream; returns the file contents."""
    text = format_sdpa(to_sdpa(sdp))
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


_SPLIT = re.compile(r"[\s,{}()]+")


def _numbers(line: str) -> list[str]:
    return [t for t in _SPLIT.split(line) if t]


def parse_sdpa(text: str) -> SDPAData:
    lines = text.splitlines()
    comments = []
    constant = 0.0
    body = []
    for ln in lines:
        st = ln.strip()
        if not st:
            continue
        if st[0] in '"*':
            comments.append(st)
            mt = re.match(r'"objective constant\s*=\s*(\S+)', st)
            if mt:
                constant = float(mt.group(1))
            continue
        body.append(st)
    if len(body) < 4:
        raise SDPAFormatError("truncated SDPA file")
    try:
        m = int(_numbers(body[0])[0])
        nblocks = int(_numbers(body[1])[0])
        sizes = [int(t) for t in _numbers(body[2])][:nblocks]
        c = [float(t) for t in _numbers(body[3])]
    except (ValueError, IndexError) as exc:
        raise SDPAFormatError(f"malformed header: {exc}") from exc
    if len(sizes) != nblocks or len(c) != m:
        raise SDPAFormatError("header dimensions disagree")
    entries = []
    for ln in body[4:]:
        tok = _numbers(ln)
        if len(tok) != 5:
            raise SDPAFormatError(f"bad entry line {ln!r}")
        mat, blk, i, j = (int(t) for t in tok[:4])
        if not (0 <= mat <= m and 1 <= blk <= nblocks):
            raise SDPAFormatError(f"entry out of range: {ln!r}")
        size = abs(sizes[blk - 1])
        if not (1 <= i <= size and 1 <= j <= size):
            raise SDPAFormatError(f"entry index out of range: {ln!r}")
        if i > j:
            i, j = j, i
        entries.append((mat, blk, i, j, float(tok[4])))
    return SDPAData(m, sizes, c, entries, constant, tuple(comments))


def read_sdpa(path) -> SDPAData:
    with open(path, encoding="utf-8") as fh:
        return parse_sdpa(fh.read())


@dataclass
class SDPAResult:
    primal_objective: float
    dual_objective: float | None
    x: np.ndarray
    phase: str = ""


def parse_sdpa_output(text: str) -> SDPAResult:
    """Objective values and the x vector from an SDPA solver output file."""
    def grab(name):
        mt = re.search(rf"{name}\s*=\s*([-+0-9.eE]+)", text)
        return float(mt.group(1)) if mt else None

    pobj = grab("objValPrimal")
    if pobj is None:
        raise SDPAFormatError("no objValPrimal in SDPA output")
    mt = re.search(r"xVec\s*=\s*\{([^}]*)\}", text)
    if not mt:
        raise SDPAFormatError("no xVec in SDPA output")
    x = np.array([float(t) for t in _numbers(mt.group(1))])
    phase = re.search(r"phase\.value\s*=\s*(\S+)", text)
    return SDPAResult(pobj, grab("objValDual"), x, phase.group(1) if phase else "")


def bound_from_sdpa_output(result: SDPAResult, sdp: SDPProblem) -> tuple[float, np.ndarray]:
    """Relaxation bound (original sense) and full moment vector from external output."""
    y0, T, _ = affine_moments(sdp)
    if len(result.x) != T.shape[1]:
        raise SDPAFormatError("xVec length does not match the exported problem")
    y = y0 + T @ result.x
    value = float(sdp.objective @ y)
    return (-value if sdp.sense == "max" else value), y
