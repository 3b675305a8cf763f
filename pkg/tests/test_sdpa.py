from __future__ import annotations

import io

import cvxpy as cp
import numpy as np
import pytest

from sparsepop import bench
from sparsepop.chordal import MAX
from sparsepop.poly import EQ, Constraint, POPInstance
from sparsepop.relax import assemble
from sparsepop.sdp import solve_internal
from sparsepop.sdp.ipm import affine_moments
from sparsepop.sdp.sdpa import (
    SDPAFormatError,
    bound_from_sdpa_output,
    export_sdpa,
    format_sdpa,
    parse_sdpa,
    parse_sdpa_output,
    read_sdpa,
    to_sdpa,
)

from conftest import chain3, quartic6, random_pop, variables


def sdpa_matrices(data):
    """Dense F_0..F_m per block, rebuilt from the entry list."""
    F = [[np.zeros((s, s)) for s in data.block_sizes] for _ in range(data.m + 1)]
    for mat, blk, i, j, v in data.entries:
        F[mat][blk - 1][i - 1, j - 1] = v
        F[mat][blk - 1][j - 1, i - 1] = v
    return F


def problems():
    yield assemble(chain3(), 1, 2, "cstsos", ce=MAX)
    yield assemble(quartic6(), 2, 1, "cstsos", ce=MAX)
    for seed in (1, 4):
        pop, d = random_pop(seed)
        yield assemble(pop, d, 1, "cs")
    x = variables(2)
    pop = POPInstance(2, x[0] * x[1] + x[0], (Constraint(1 - x[0] ** 2 - x[1] ** 2, EQ),))
    yield assemble(pop, 2, hierarchy="dense")
    yield assemble(bench.maxcut_blockband(1, 6, 0, 6).to_pop(), 2, 1, "cstsos", binary=True)


@pytest.mark.parametrize("sdp", list(problems()), ids=lambda s: s.pop.name)
def test_sdpa_matrices_reproduce_moment_blocks(sdp):
    data = to_sdpa(sdp)
    F = sdpa_matrices(data)
    y0, T, _ = affine_moments(sdp)
    rng = np.random.default_rng(0)
    for _ in range(3):
        z = rng.normal(size=data.m)
        y = y0 + T @ z
        for b, blk in enumerate(sdp.blocks):
            lhs = sum(z[i] * F[i + 1][b] for i in range(data.m)) - F[0][b]
            np.testing.assert_allclose(lhs, blk.matrix(y), atol=1e-10)
        assert np.dot(data.c, z) + data.constant == pytest.approx(sdp.objective @ y, abs=1e-10)


@pytest.mark.parametrize("sdp", list(problems()), ids=lambda s: s.pop.name)
def test_round_trip_and_byte_stability(sdp):
    data = to_sdpa(sdp)
    text = format_sdpa(data)
    assert parse_sdpa(text).same_structure(data)
    assert format_sdpa(to_sdpa(sdp)) == text


def test_export_to_path_and_stream(tmp_path):
    sdp = assemble(chain3(), 1, 2, "cstsos", ce=MAX)
    path = tmp_path / "chain.dat-s"
    text = export_sdpa(sdp, path)
    assert path.read_bytes() == text.encode()
    buf = io.StringIO()
    assert export_sdpa(sdp, buf) == text == buf.getvalue()
    assert read_sdpa(path).same_structure(to_sdpa(sdp))


def test_constant_comment_only_when_nonzero():
    sdp = assemble(chain3(), 1, 2, "cstsos", ce=MAX)
    data = to_sdpa(sdp)
    assert data.constant != 0.0
    text = format_sdpa(data)
    assert text.startswith('"objective constant')
    assert parse_sdpa(text).constant == data.constant
    data.constant = 0.0
    assert not format_sdpa(data).startswith('"')


def test_parser_accepts_sdpa_punctuation():
    text = "* comment\n2 =m\n2 =nBlock\n{2, -1}\n{1.0, 2.0}\n0 1 1 1 1.0\n1 1 2 1 0.5\n2 2 1 1 -1\n"
    data = parse_sdpa(text)
    assert data.m == 2 and data.block_sizes == [2, -1]
    assert (1, 1, 1, 2, 0.5) in data.entries         # lower-triangle entry mirrored


@pytest.mark.parametrize("text", [
    "1\n1\n",
    "x\n1\n1\n1.0\n",
    "1\n2\n3\n1.0\n",
    "2\n1\n2\n1.0\n",
    "1\n1\n2\n1.0\n0 1 1\n",
    "1\n1\n2\n1.0\n3 1 1 1 1.0\n",
    "1\n1\n2\n1.0\n1 1 3 1 1.0\n",
])
def test_parse_errors(text):
    with pytest.raises(SDPAFormatError):
        parse_sdpa(text)


def test_external_solution_maps_back_to_bound():
    sdp = assemble(quartic6(), 2, 1, "cstsos", ce=MAX)
    sol = solve_internal(sdp)
    y0, T, _ = affine_moments(sdp)
    z = np.linalg.lstsq(T.toarray() if hasattr(T, "toarray") else T, sol.y - y0, rcond=None)[0]
    body = ", ".join(repr(float(v)) for v in z)
    out = (f"phase.value  = pdOPT\nobjValPrimal = {sol.objective:+.12e}\nobjValDual = {sol.objective:+.12e}\n"
           f"xVec = \n{{{body}}}\nxMat = \n{{ }}\n")
    res = parse_sdpa_output(out)
    assert res.phase == "pdOPT"
    bound, y = bound_from_sdpa_output(res, sdp)
    assert bound == pytest.approx(sol.objective, abs=1e-8)
    np.testing.assert_allclose(y, sol.y, atol=1e-8)
    res.x = res.x[:-1]
    with pytest.raises(SDPAFormatError):
        bound_from_sdpa_output(res, sdp)


@pytest.mark.parametrize("text", ["objValDual = 1\nxVec = {1}", "objValPrimal = 1\n"])
def test_output_parse_errors(text):
    with pytest.raises(SDPAFormatError):
        parse_sdpa_output(text)


def test_exported_problem_solves_to_internal_bound():
    # the SDPA data handed to an independent conic solver gives the same bound
    pop, d = random_pop(3)
    sdp = assemble(pop, d, 1, "cs")
    data = parse_sdpa(format_sdpa(to_sdpa(sdp)))
    F = sdpa_matrices(data)
    z = cp.Variable(data.m)
    cons = []
    for b in range(len(data.block_sizes)):
        M = sum(z[i] * F[i + 1][b] for i in range(data.m)) - F[0][b]
        cons.append(0.5 * (M + M.T) >> 0)
    prob = cp.Problem(cp.Minimize(np.array(data.c) @ z + data.constant), cons)
    prob.solve(solver=cp.CLARABEL)
    assert prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
    assert prob.value == pytest.approx(solve_internal(sdp).objective, abs=1e-5)


def test_inconsistent_equalities_cannot_be_exported():
    x = variables(1)
    pop = POPInstance(1, x[0] ** 2, (Constraint(1 - x[0] ** 2, EQ), Constraint(4 - x[0] ** 2, EQ)))
    with pytest.raises(ValueError):
        to_sdpa(assemble(pop, 1, hierarchy="dense"))
