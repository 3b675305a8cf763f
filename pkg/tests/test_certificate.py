from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from sparsepop import bench
from sparsepop.chordal import MAX
from sparsepop.poly import EQ, Constraint, Polynomial, POPInstance
from sparsepop.relax import assemble
from sparsepop.sdp import solve_internal
from sparsepop.sdp.certificate import (
    MissingDualError,
    certificate_polynomial,
    check_certificate,
    evaluation_residual,
)

from conftest import chain3, quartic6, random_pop, variables


def test_hand_built_gram_for_a_square():
    # (x - 1)^2 with basis (1, x): Gram [[1, -1], [-1, 1]] and rho = 0
    x = Polynomial.variable(1, 0)
    sdp = assemble(POPInstance(1, (x - 1) ** 2), 1, hierarchy="dense")
    sol = solve_internal(sdp)
    assert sdp.blocks[0].basis == ((0,), (1,))
    exact = dataclasses.replace(sol, dual_value=0.0, gram=[np.array([[1.0, -1.0], [-1.0, 1.0]])])
    coeffs = certificate_polynomial(exact, sdp)
    assert max(abs(v) for v in coeffs.values()) == 0.0
    rep = check_certificate(exact, sdp)
    assert rep.coefficient_residual == 0.0 and rep.evaluation_residual < 1e-12
    # a wrong Gram shows up in both routes
    off = dataclasses.replace(exact, gram=[np.array([[1.0, -0.9], [-0.9, 1.0]])])
    rep = check_certificate(off, sdp)
    assert rep.coefficient_residual == pytest.approx(0.2)
    assert rep.evaluation_residual > 0.1


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("hierarchy", ["dense", "cs", "cstsos"])
def test_certificate_residual_is_small(seed, hierarchy):
    pop, d = random_pop(seed)
    sdp = assemble(pop, d, 1, hierarchy, ce=MAX)
    sol = solve_internal(sdp)
    assert sol.ok
    rep = check_certificate(sol, sdp)
    assert rep.coefficient_residual < 1e-5
    assert rep.symmetry_violations == 0
    assert rep.rho == sol.dual_value
    assert rep.ok()


def test_evaluation_route_agrees_with_coefficients():
    sdp = assemble(quartic6(), 2, 1, "cstsos", ce=MAX)
    sol = solve_internal(sdp)
    coeffs = certificate_polynomial(sol, sdp)
    pts = np.random.default_rng(3).uniform(-1, 1, (20, 6))
    direct = max(abs(sum(c * np.prod(p ** np.array(e)) for e, c in coeffs.items())) for p in pts)
    assert evaluation_residual(sol, sdp, pts) == pytest.approx(direct, abs=1e-12)


def test_equality_multipliers_enter_the_identity():
    x = variables(2)
    pop = POPInstance(2, x[0] + x[1], (Constraint(1 - x[0] ** 2 - x[1] ** 2, EQ),))
    sdp = assemble(pop, 2, hierarchy="dense")
    sol = solve_internal(sdp)
    assert sol.objective == pytest.approx(-np.sqrt(2), abs=1e-6)
    rep = check_certificate(sol, sdp)
    assert rep.coefficient_residual < 1e-5
    dropped = dataclasses.replace(sol, eq_multipliers=np.zeros_like(sol.eq_multipliers))
    assert check_certificate(dropped, sdp).coefficient_residual > 1e-2


def test_binary_certificate_holds_on_sign_vectors():
    g = bench.maxcut_blockband(1, 6, 0, 6)
    sdp = assemble(g.to_pop(), 2, 1, "cstsos", binary=True)
    sol = solve_internal(sdp)
    rep = check_certificate(sol, sdp)
    assert rep.coefficient_residual < 1e-5
    assert rep.evaluation_residual < 1e-5
    assert rep.symmetry_violations == 0


def test_symmetry_violation_is_counted():
    pop = chain3()
    sdp = assemble(POPInstance(3, pop.objective - pop.objective.coefficient((0, 0, 1)) * Polynomial.variable(3, 2)),
                   1, hierarchy="dense")
    # without the linear term x3 -> -x3 is a symmetry: Gram entries pairing x3 with 1, x1 or x2 are odd
    assert sdp.structure.symmetry.bits
    sol = solve_internal(sdp)
    assert check_certificate(sol, sdp).symmetry_violations == 0
    X = [G.copy() for G in sol.gram]
    X[0][0, 3] = X[0][3, 0] = 0.5
    assert check_certificate(dataclasses.replace(sol, gram=X), sdp).symmetry_violations == 1


def test_missing_dual_data():
    sdp = assemble(chain3(), 1, hierarchy="dense")
    sol = solve_internal(sdp)
    with pytest.raises(MissingDualError):
        check_certificate(dataclasses.replace(sol, gram=[]), sdp)
    with pytest.raises(MissingDualError):
        check_certificate(sol, dataclasses.replace(sdp, pop=None))
