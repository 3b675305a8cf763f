"""Primal-dual interior-point method for block-diagonal moment SDPs.

The moment problem  min c'y + c0  s.t.  G_b(y) = G_b0 + sum_i y_i G_bi >= 0
is the dual of the standard form
    min <C, X>  s.t.  <A_i, X> = b_i,  X >= 0
with C = G0, A_i = -G_i, b = -c, so the primal X are the Gram matrices of
the sum-of-squares certificate. Search directions use Nesterov-Todd scaling
with a Mehrotra predictor-corrector.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from ..relax import SDPProblem

log = logging.getLogger(__name__)

OPTIMAL = "Optimal"
NEAR_OPTIMAL = "NearOptimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITER_LIMIT = "IterLimit"
NUMERICAL_FAILURE = "NumericalFailure"
SUCCESS = (OPTIMAL, NEAR_OPTIMAL)

KRON_LIMIT = 40           # blocks up to this size build the Schur term via kron(W, W)


class NumericalFailure(RuntimeError):
    pass


@dataclass
class SolverConfig:
    max_iter: int = 200
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    step_fraction: float = 0.98
    near_tol: float = 1e-6
    regularization: float = 1e-10
    retry_regularization: float = 1e-8
    divergence: float = 1e12
    polish_iter: int = 3              # extra iterations after convergence, best one kept

    def __post_init__(self):
        if self.feas_tol <= 0 or self.gap_tol <= 0 or self.near_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step fraction must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.polish_iter < 0:
            raise ValueError("polish_iter must be non-negative")


@dataclass
class SDPSolution:
    status: str
    y: np.ndarray                     # full layout vector, y[0] = 1
    objective: float                  # bound in the sense of the original problem
    moment_value: float               # c'y + c0 (minimization form)
    dual_value: float                 # SOS-side value c0 - <G0, X> - lambda'e0
    moments: list                     # per block G_b(y)
    gram: list                        # per block X_b
    eq_multipliers: np.ndarray
    iterations: int
    residuals: dict = field(default_factory=dict)
    solve_time: float = 0.0
    block_keys: list = field(default_factory=list)
    history: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status in SUCCESS


# --------------------------------------------------------------- reduction

def _block_operator(block, n_slots: int) -> sps.csr_matrix:
    """Sparse (s*s x n_slots) map from the layout vector to row-major vec(G_b)."""
    s = block.size
    r, c = block.rows, block.cols
    off = r != c
    rr = np.concatenate([r * s + c, (c * s + r)[off]])
    ss = np.concatenate([block.slots, block.slots[off]])
    vv = np.concatenate([block.coefs, block.coefs[off]])
    return sps.csr_matrix((vv, (rr, ss)), shape=(s * s, n_slots))


@dataclass
class _Reduced:
    """Equality-free standard form data."""
    y_particular: np.ndarray          # full layout vector at z = 0
    T: sps.csr_matrix                 # full layout = y_particular + T z
    C: list                           # per block constant matrix (dense)
    G: list                           # per block (m_b x s*s) csr, rows = active vars
    active: list                      # per block active variable ids
    sizes: list
    b: np.ndarray                     # = -c restricted
    c0: float
    m: int


def eliminate_equalities(sdp: SDPProblem, tol: float = 1e-10):
    """Affine parametrization y_free = y_p + T z of {E y_free = e} via pivoted QR."""
    nf = sdp.n_vars
    if sdp.n_eq == 0:
        return np.zeros(nf), sps.identity(nf, format="csr"), 0.0
    E, e = sdp.equality_matrix()
    Q, R, P = sla.qr(E, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(1.0, diag[0] if diag.size else 0.0)))
    basic, nonbasic = P[:rank], P[rank:]
    qe = Q.T @ e
    R11 = R[:rank, :rank]
    yp = np.zeros(nf)
    if rank:
        yp[basic] = sla.solve_triangular(R11, qe[:rank])
    infeas = float(np.linalg.norm(E @ yp - e))
    T = np.zeros((nf, nf - rank))
    T[nonbasic, np.arange(nf - rank)] = 1.0
    if rank:
        T[basic, :] = -sla.solve_triangular(R11, R[:rank, rank:])
    T[np.abs(T) < 1e-14] = 0.0
    return yp, sps.csr_matrix(T), infeas


def _block_columns(blocks_ops, T):
    """Per block: constant-free operator restricted to its active variables."""
    G, active = [], []
    for Gfull in blocks_ops:
        Gz = (Gfull @ T).tocsc()
        Gz.eliminate_zeros()
        act = np.flatnonzero(np.diff(Gz.indptr))
        G.append(Gz[:, act].T.tocsr())
        active.append(act)
    return G, active


def independent_columns(ops, b: np.ndarray, m: int, tol: float = 1e-10) -> np.ndarray:
    """Indices of a maximal independent set of variables.

    Two variable sets that only ever enter the blocks (and the objective) in a
    fixed linear combination make the Schur complement singular; dropping the
    dependent ones leaves the reachable block matrices and objective unchanged.
    """
    K = np.outer(b, b)
    for G, act in ops:
        if len(act):
            K[np.ix_(act, act)] += (G @ G.T).toarray()
    d = np.sqrt(np.maximum(np.diag(K), 1e-300))
    Kn = K / d[:, None] / d[None, :]
    _, piv, rank, _ = sla.lapack.dpstrf(Kn, tol=tol, lower=1)
    if rank >= m:
        return np.arange(m)
    return np.sort(piv[:rank] - 1)


def affine_moments(sdp: SDPProblem):
    """(y0, T, residual): every equality-feasible layout vector is y0 + T z."""
    yp_free, T_free, infeas = eliminate_equalities(sdp)
    y0 = np.concatenate([[1.0], yp_free])
    T = sps.vstack([sps.csr_matrix((1, T_free.shape[1])), T_free]).tocsr()
    return y0, T, infeas


def block_operators(sdp: SDPProblem) -> list:
    n_slots = len(sdp.layout)
    return [_block_operator(block, n_slots) for block in sdp.blocks]


def reduce_problem(sdp: SDPProblem) -> tuple[_Reduced, float]:
    y0, T, infeas = affine_moments(sdp)
    ops = block_operators(sdp)
    c = sdp.objective
    G, active = _block_columns(ops, T)
    b = -np.asarray(T.T @ c).ravel()
    keep = independent_columns(list(zip(G, active)), b, T.shape[1])
    if len(keep) < T.shape[1]:
        log.debug("dropping %d dependent moment variables", T.shape[1] - len(keep))
        T = T[:, keep]
        G, active = _block_columns(ops, T)
        b = b[keep]
    C = [(Gfull @ y0).reshape(blk.size, blk.size) for Gfull, blk in zip(ops, sdp.blocks)]
    sizes = [blk.size for blk in sdp.blocks]
    return _Reduced(y0, T, C, G, active, sizes, b, float(c @ y0), T.shape[1]), infeas


# --------------------------------------------------------------- linear algebra helpers

def _vec(X: np.ndarray) -> np.ndarray:
    return X.reshape(-1)


def _sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + X.T)


def _min_step(L_inv_sqrt: np.ndarray, D: np.ndarray) -> float:
    """Largest a with I + a L^-1/2 D L^-1/2 >= 0 (inf if none)."""
    M = L_inv_sqrt[:, None] * D * L_inv_sqrt[None, :]
    lam = np.linalg.eigvalsh(_sym(M))[0]
    return np.inf if lam >= 0 else -1.0 / lam


class _Factor:
    """Jacobi-equilibrated, regularized Cholesky factor of the Schur complement."""

    def __init__(self, M: np.ndarray, reg: float):
        d = np.sqrt(np.maximum(np.diag(M), 1e-300))
        self.d = 1.0 / d
        Mh = M * self.d[:, None] * self.d[None, :]
        Mh[np.diag_indices_from(Mh)] += reg
        self.cho = sla.cho_factor(Mh, lower=True, check_finite=False)

    def solve(self, r: np.ndarray) -> np.ndarray:
        return self.d * sla.cho_solve(self.cho, self.d * r, check_finite=False)


def _chol(M: np.ndarray, reg: float) -> _Factor | None:
    try:
        return _Factor(M, reg)
    except (np.linalg.LinAlgError, sla.LinAlgError):
        return None


def _diverging(history: list, tol: float, window: int = 8) -> bool:
    """Moment side feasible while b'y keeps growing geometrically without a closing gap."""
    if len(history) <= window:
        return False
    last, ref = history[-1], history[-1 - window]
    return (last["reld"] <= tol and last["dobj"] > 1e3
            and last["dobj"] >= 10.0 * max(1.0, abs(ref["dobj"])))


class _Solver:
    def __init__(self, red: _Reduced, cfg: SolverConfig, objective_scale: float = 1.0):
        self.red = red
        self.cfg = cfg
        self.objective_scale = objective_scale
        self.m = red.m
        self.nb = len(red.sizes)

    # A(X) = -sum G_b vec(X_b)
    def A(self, Xs) -> np.ndarray:
        out = np.zeros(self.m)
        for G, act, X in zip(self.red.G, self.red.active, Xs):
            out[act] -= G @ _vec(X)
        return out

    def At(self, y) -> list:
        out = []
        for G, act, s in zip(self.red.G, self.red.active, self.red.sizes):
            out.append(-(G.T @ y[act]).reshape(s, s))
        return out

    def schur(self, Ws, Rs=None) -> np.ndarray:
        """M_ij = <A_i, W A_j W>.  With factors W = R R' small blocks use the Gram
        form B B' (B_i = R' A_i R), which stays PSD under rounding."""
        M = np.zeros((self.m, self.m))
        for b, (G, act, s, W) in enumerate(zip(self.red.G, self.red.active, self.red.sizes, Ws)):
            if len(act) == 0:
                continue
            if s <= KRON_LIMIT and Rs is not None:
                B = np.asarray((G @ np.kron(Rs[b], Rs[b])))
                Mb = B @ B.T
            elif s <= KRON_LIMIT:
                GK = G @ np.kron(W, W)
                Mb = np.asarray(G @ GK.T)
            else:
                # W A_i W as a sum of outer products over the few nonzeros of A_i
                Mb = np.empty((len(act), len(act)))
                for i in range(len(act)):
                    lo, hi = G.indptr[i], G.indptr[i + 1]
                    idx, vals = G.indices[lo:hi], G.data[lo:hi]
                    Bi = (W[:, idx // s] * vals) @ W[idx % s, :]
                    Mb[i] = G @ Bi.ravel()
            M[np.ix_(act, act)] += _sym(Mb)
        return M

    def starting_point(self):
        X, S = [], []
        b = self.red.b
        for G, act, C, s in zip(self.red.G, self.red.active, self.red.C, self.red.sizes):
            norms = np.sqrt(np.asarray(G.multiply(G).sum(axis=1)).ravel()) if len(act) else np.zeros(0)
            bb = np.abs(b[act]) if len(act) else np.zeros(0)
            xi = max(10.0, np.sqrt(s), s * float(np.max((1 + bb) / (1 + norms), initial=0.0)))
            eta = max(10.0, np.sqrt(s), float(np.max(norms, initial=0.0)), float(np.linalg.norm(C)))
            X.append(xi * np.eye(s))
            S.append(eta * np.eye(s))
        return X, np.zeros(self.m), S

    def nt_scaling(self, X, S):
        out = []
        for Xb, Sb in zip(X, S):
            Lx = np.linalg.cholesky(_sym(Xb))
            Ls = np.linalg.cholesky(_sym(Sb))
            U, d, Vt = np.linalg.svd(Ls.T @ Lx)
            R = Lx @ Vt.T / np.sqrt(d)[None, :]
            Rinv = (np.sqrt(d)[:, None] * Vt) @ sla.solve_triangular(Lx, np.eye(len(d)), lower=True)
            out.append((R, Rinv, d, R @ R.T))
        return out

    def direction(self, scal, Rp, Rd, H, chol, M):
        Rc = []
        for (R, _, lam, _), Hb in zip(scal, H):
            Z = 2.0 * Hb / (lam[:, None] + lam[None, :])
            Rc.append(R @ Z @ R.T)
        tmp = [Rcb - W @ Rdb @ W for Rcb, Rdb, (_, _, _, W) in zip(Rc, Rd, scal)]
        rhs = Rp - self.A(tmp)
        dy = chol.solve(rhs)
        # iterative refinement against the unregularized Schur complement
        for _ in range(3):
            r = rhs - M @ dy
            if np.linalg.norm(r) <= 1e-15 * (1 + np.linalg.norm(rhs)):
                break
            dy = dy + chol.solve(r)
        Aty = self.At(dy)
        dS = [Rdb - a for Rdb, a in zip(Rd, Aty)]
        dX = [_sym(Rcb - W @ dSb @ W) for Rcb, dSb, (_, _, _, W) in zip(Rc, dS, scal)]
        # cancellation in W dS W loses primal feasibility near the boundary;
        # refine dX within the same scaled metric
        for _ in range(2):
            res = Rp - self.A(dX)
            if np.linalg.norm(res) <= 1e-15 * (1 + np.linalg.norm(Rp)):
                break
            fix = self.At(chol.solve(res))
            dX = [d + _sym(W @ f @ W) for d, f, (_, _, _, W) in zip(dX, fix, scal)]
        dS = [_sym(x) for x in dS]
        return dX, dy, dS

    def step_lengths(self, scal, dX, dS):
        ap = ad = np.inf
        scaled = []
        for (R, Rinv, lam, _), dXb, dSb in zip(scal, dX, dS):
            dXt = Rinv @ dXb @ Rinv.T
            dSt = R.T @ dSb @ R
            inv = 1.0 / np.sqrt(lam)
            ap = min(ap, _min_step(inv, dXt))
            ad = min(ad, _min_step(inv, dSt))
            scaled.append((dXt, dSt))
        return ap, ad, scaled

    def unbounded_ray(self, y, tol: float = 1e-6) -> bool:
        """y drifts along d with b'd > 0 and -A^*(d) PSD: the moment side is unbounded."""
        ny = float(np.linalg.norm(y))
        if ny < 1e2 or not np.isfinite(ny):
            return False
        d = y / ny
        bd = float(self.red.b @ d)
        if bd <= tol:
            return False
        worst = min(float(np.linalg.eigvalsh(-a)[0]) for a in self.At(d))
        return worst >= -tol * bd

    def run(self):
        cfg = self.cfg
        red = self.red
        b = red.b
        X, y, S = self.starting_point()
        normb = float(np.linalg.norm(b))
        normC = float(np.sqrt(sum(np.sum(C * C) for C in red.C)))
        N = sum(red.sizes)
        history = []
        it = 0
        stats = {}
        best = None                  # (score, X, y, S, stats) of the most accurate iterate
        stall = 0
        converged = None             # (score, X, y, S, it, stats) of the best converged iterate
        polish = 0
        for it in range(1, cfg.max_iter + 1):
            Rp = b - self.A(X)
            Aty = self.At(y)
            Rd = [C - Sb - a for C, Sb, a in zip(red.C, S, Aty)]
            pobj = float(sum(np.sum(C * Xb) for C, Xb in zip(red.C, X)))
            dobj = float(b @ y)
            xs = float(sum(np.sum(Xb * Sb) for Xb, Sb in zip(X, S)))
            relp = float(np.linalg.norm(Rp)) / (1 + normb)
            reld = float(np.sqrt(sum(np.sum(r * r) for r in Rd))) / (1 + normC)
            # relative gap between the two bounds in the original objective units
            t = self.objective_scale
            gap = t * xs / (1 + abs(red.c0 - t * pobj) + abs(red.c0 - t * dobj))
            stats = {"relp": relp, "reld": reld, "gap": gap, "pobj": pobj, "dobj": dobj, "mu": xs / N}
            history.append(dict(stats))
            log.debug("it %d pobj %.8e dobj %.8e relp %.1e reld %.1e gap %.1e", it, pobj, dobj, relp, reld, gap)
            score = max(relp, reld, gap)
            if best is None or score < best[0]:
                best = (score, X, y, S, stats)
                stall = 0
            else:
                stall += 1
            if max(relp, reld) <= cfg.feas_tol and gap <= cfg.gap_tol:
                if converged is None or score < converged[0]:
                    converged = (score, X, y, S, it, stats)
            if converged is not None:
                if polish >= cfg.polish_iter:
                    break
                polish += 1
            if abs(dobj) > cfg.divergence and reld < 1e-6:
                return UNBOUNDED, X, y, S, it, stats, history
            if abs(pobj) > cfg.divergence and relp < 1e-6:
                return INFEASIBLE, X, y, S, it, stats, history
            if stall >= 5:
                break
            try:
                scal = self.nt_scaling(X, S)
            except np.linalg.LinAlgError:
                break
            M = self.schur([sc[3] for sc in scal], [sc[0] for sc in scal])
            chol = _chol(M, cfg.regularization)
            if chol is None:
                chol = _chol(M, cfg.retry_regularization)
            if chol is None:
                break
            mu = xs / N
            # predictor
            H = [-np.diag(lam * lam) for (_, _, lam, _) in scal]
            dXa, _, dSa = self.direction(scal, Rp, Rd, H, chol, M)
            ap, ad, scaled = self.step_lengths(scal, dXa, dSa)
            ap, ad = min(1.0, ap), min(1.0, ad)
            xs_a = float(sum(np.sum((Xb + ap * dx) * (Sb + ad * ds)) for Xb, Sb, dx, ds in zip(X, S, dXa, dSa)))
            expon = 1.0 if mu > 1e-6 and min(ap, ad) < 0.2 else max(1.0, 3 * min(ap, ad) ** 2)
            sigma = min(1.0, max(0.0, xs_a / xs)) ** expon
            # corrector
            H = []
            for (_, _, lam, _), (dXt, dSt) in zip(scal, scaled):
                H.append(sigma * mu * np.eye(len(lam)) - np.diag(lam * lam) - _sym(dXt @ dSt))
            dX, dy, dS = self.direction(scal, Rp, Rd, H, chol, M)
            ap, ad, _ = self.step_lengths(scal, dX, dS)
            gamma = min(cfg.step_fraction, 0.9 + 0.09 * min(ap, ad))
            ap = min(1.0, gamma * ap)
            ad = min(1.0, gamma * ad)
            if not np.isfinite(ap) or not np.isfinite(ad) or max(ap, ad) < 1e-12:
                break
            X = [Xb + ap * d for Xb, d in zip(X, dX)]
            y = y + ad * dy
            S = [Sb + ad * d for Sb, d in zip(S, dS)]
        else:
            it = cfg.max_iter
        if converged is not None:
            _, X, y, S, it, stats = converged
            return OPTIMAL, X, y, S, it, stats, history
        if self.unbounded_ray(y) or _diverging(history, cfg.feas_tol):
            return UNBOUNDED, X, y, S, it, stats, history
        score, X, y, S, stats = best
        if score <= cfg.near_tol:
            status = NEAR_OPTIMAL
        else:
            status = ITER_LIMIT if it >= cfg.max_iter else NUMERICAL_FAILURE
        return status, X, y, S, it, stats, history


def _polish_gram(solver: _Solver, X: list, rounds: int = 3) -> list:
    """Reduce b - A(X) with corrections X A^*(z) X that stay inside range(X).

    Near the boundary the Newton directions lose primal accuracy; a correction
    in the metric of X itself keeps every block PSD for small residuals.  A
    round is kept only if it shrinks the residual without losing PSD-ness.
    """
    res = np.linalg.norm(solver.red.b - solver.A(X))
    for _ in range(rounds):
        if res == 0.0:
            break
        r = solver.red.b - solver.A(X)
        z, *_ = np.linalg.lstsq(solver.schur(X), r, rcond=1e-13)
        Xn = [_sym(Xb + Xb @ f @ Xb) for Xb, f in zip(X, solver.At(z))]
        new = np.linalg.norm(solver.red.b - solver.A(Xn))
        if not new < 0.5 * res or any(np.linalg.eigvalsh(Xb)[0] < 0.0 for Xb in Xn):
            break
        X, res = Xn, new
    return X


def _equality_multipliers(sdp: SDPProblem, red: _Reduced, X) -> tuple[np.ndarray, float]:
    """Least-squares multipliers for the eliminated equalities and the SOS-side value."""
    n_slots = len(sdp.layout)
    g = np.zeros(n_slots)            # sum_b <G_b^alpha, X_b> per slot
    for block, Xb in zip(sdp.blocks, X):
        g += _block_operator(block, n_slots).T @ _vec(Xb)
    resid = sdp.objective - g
    if sdp.n_eq == 0:
        return np.zeros(0), float(resid[0])
    E = np.zeros((sdp.n_eq, n_slots))
    np.add.at(E, (sdp.eq_rows, sdp.eq_slots), sdp.eq_coefs)
    lam, *_ = np.linalg.lstsq(E[:, 1:].T, resid[1:], rcond=None)
    return lam, float(resid[0] - lam @ E[:, 0])


def solve_internal(sdp: SDPProblem, cfg: SolverConfig | None = None) -> SDPSolution:
    """Solve the moment SDP; returns bound, moment matrices and Gram matrices."""
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    if not sdp.blocks or any(b.size == 0 for b in sdp.blocks):
        raise ValueError("SDP needs at least one nonempty PSD block")
    red, infeas = reduce_problem(sdp)
    keys = [b.key for b in sdp.blocks]
    if infeas > 1e-8 * (1 + float(np.linalg.norm(sdp.eq_coefs, np.inf) if sdp.n_eq else 0.0)):
        nan = float("nan")
        return SDPSolution(INFEASIBLE, red.y_particular, nan, nan, nan, [], [], np.zeros(0), 0,
                           {"equality_residual": infeas}, time.perf_counter() - t0, keys)
    if red.m == 0:
        raise ValueError("SDP has no free moment variables")
    # scale data so that b and C have unit norm; X scales with b, (y, S) with C
    bscale = max(1.0, float(np.linalg.norm(red.b)))
    cscale = max(1.0, float(np.sqrt(sum(np.sum(C * C) for C in red.C))))
    scaled = replace(red, b=red.b / bscale, C=[C / cscale for C in red.C])
    status, X, z, S, it, stats, history = _Solver(scaled, cfg, bscale * cscale).run()
    X = [Xb * bscale for Xb in X]
    if status in SUCCESS and cfg.polish_iter:
        X = _polish_gram(_Solver(red, cfg), X)
    z = z * cscale
    y = red.y_particular + red.T @ z
    moments = [blk.matrix(y) for blk in sdp.blocks]
    moment_value = float(sdp.objective @ y)
    lam, dual_value = _equality_multipliers(sdp, red, X)
    sign = -1.0 if sdp.sense == "max" else 1.0
    # certificates of unboundedness / infeasibility fix the bound at -inf / +inf (minimization form)
    bound = {UNBOUNDED: -np.inf, INFEASIBLE: np.inf}.get(status, moment_value)
    stats = dict(stats)
    stats["min_moment_eig"] = float(min(np.linalg.eigvalsh(Mb)[0] for Mb in moments))
    return SDPSolution(status, y, sign * bound, moment_value, dual_value, moments, X, lam, it,
                       stats, time.perf_counter() - t0, keys, history)
