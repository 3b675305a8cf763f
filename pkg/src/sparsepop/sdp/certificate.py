"""Sum-of-squares certificate reconstruction and residual checks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..poly import Exponent, exp_add, exp_mod2
from ..relax import SDPProblem
from .ipm import SDPSolution


class MissingDualError(ValueError):
    pass


@dataclass
class CertificateReport:
    rho: float
    coefficient_residual: float       # max |coefficient| of rho + sum sigma g + sum lambda h m - f
    evaluation_residual: float        # max |same polynomial| over random points
    points: int
    symmetry_violations: int          # Gram entries above threshold with R-odd exponent
    worst_term: tuple | None = None
    details: dict = field(default_factory=dict)

    def ok(self, tol: float = 1e-5) -> bool:
        return self.coefficient_residual <= tol and self.symmetry_violations == 0


def _red(e: Exponent, binary: bool) -> Exponent:
    return exp_mod2(e) if binary else e


def _local_terms(sdp: SDPProblem, key) -> list[tuple[Exponent, float]]:
    l, j, _ = key
    n = sdp.pop.n
    if j <= 0:
        return [((0,) * n, 1.0)]
    g = sdp.pop.constraints[j - 1].poly
    return list((g.reduce_binary() if sdp.binary else g).items())


def _objective(sdp: SDPProblem):
    f = sdp.pop.minimization_objective()
    return f.reduce_binary() if sdp.binary else f


def certificate_polynomial(sol: SDPSolution, sdp: SDPProblem) -> dict[Exponent, float]:
    """Coefficients of rho + sum_b <X_b, g_b v v'> + sum lambda h x^(beta+gamma) - f."""
    n = sdp.pop.n
    binary = sdp.binary
    acc: dict[Exponent, float] = {(0,) * n: sol.dual_value}
    for blk, X in zip(sdp.blocks, sol.gram):
        gterms = _local_terms(sdp, blk.key)
        basis = blk.basis
        for r in range(blk.size):
            for c in range(blk.size):
                w = X[r, c]
                if w == 0.0:
                    continue
                s = exp_add(basis[r], basis[c])
                for alpha, g in gterms:
                    e = _red(exp_add(s, alpha), binary)
                    acc[e] = acc.get(e, 0.0) + w * g
    for lam, (key, beta, gamma) in zip(sol.eq_multipliers, sdp.eq_keys):
        s = exp_add(beta, gamma)
        for alpha, h in _local_terms(sdp, key):
            e = _red(exp_add(s, alpha), binary)
            acc[e] = acc.get(e, 0.0) + lam * h
    for alpha, fa in _objective(sdp).items():
        acc[alpha] = acc.get(alpha, 0.0) - fa
    return acc


def _monomial(points: np.ndarray, e: Exponent) -> np.ndarray:
    out = np.ones(points.shape[0])
    for i, a in enumerate(e):
        if a:
            out = out * points[:, i] ** a
    return out


def evaluation_residual(sol: SDPSolution, sdp: SDPProblem, points: np.ndarray) -> float:
    """Evaluate the certificate identity pointwise (sigma_b as v' X v at each point)."""
    pop = sdp.pop
    total = np.full(points.shape[0], sol.dual_value)
    for blk, X in zip(sdp.blocks, sol.gram):
        V = np.column_stack([_monomial(points, b) for b in blk.basis])
        sigma = np.einsum("pi,ij,pj->p", V, X, V)
        l, j, _ = blk.key
        if j > 0:
            g = pop.constraints[j - 1].poly
            sigma = sigma * np.array([g.evaluate(x) for x in points])
        total += sigma
    for lam, (key, beta, gamma) in zip(sol.eq_multipliers, sdp.eq_keys):
        h = pop.constraints[key[1] - 1].poly
        total += lam * _monomial(points, exp_add(beta, gamma)) * np.array([h.evaluate(x) for x in points])
    f = pop.minimization_objective()
    total -= np.array([f.evaluate(x) for x in points])
    return float(np.max(np.abs(total)))


def check_certificate(sol: SDPSolution, sdp: SDPProblem, n_points: int = 100, seed: int = 0,
                      zero_threshold: float = 1e-6) -> CertificateReport:
    if not sol.gram or len(sol.gram) != len(sdp.blocks):
        raise MissingDualError("solution carries no Gram matrices")
    if sdp.pop is None:
        raise MissingDualError("problem carries no polynomial data")
    coeffs = certificate_polynomial(sol, sdp)
    worst = max(coeffs.items(), key=lambda kv: abs(kv[1]))
    rng = np.random.default_rng(seed)
    n = sdp.pop.n
    if sdp.binary:
        # the identity only holds modulo x_i^2 = 1
        pts = rng.choice([-1.0, 1.0], size=(n_points, n))
    else:
        pts = rng.uniform(-1.0, 1.0, size=(n_points, n))
    ev = evaluation_residual(sol, sdp, pts)

    violations = 0
    R = sdp.structure.symmetry if sdp.structure is not None else None
    if R is not None:
        for blk, X in zip(sdp.blocks, sol.gram):
            rr, cc = np.nonzero(np.abs(X) > zero_threshold)
            for r, c in zip(rr, cc):
                if r <= c and not R.respects(exp_add(blk.basis[r], blk.basis[c])):
                    violations += 1
    return CertificateReport(sol.dual_value, abs(worst[1]), ev, n_points, violations, (worst[0], worst[1]))
