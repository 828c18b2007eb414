"""Dense block-diagonal SDP solver.

Standard primal/dual pair::

    min  sum_j <C_j, X_j>   s.t.  sum_j <A_ij, X_j> = b_i,   X_j >= 0
    max  b^T y              s.t.  C_j - sum_i y_i A_ij = S_j >= 0

solved by a primal-dual path-following method on the homogeneous
self-dual embedding, with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps.  Problems are small (total block dimension
up to a few hundred) so everything is dense.
"""

from __future__ import annotations

import enum
import itertools
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

_dump_counter = itertools.count()


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class SdpProblem:
    """Block-diagonal SDP in standard form.

    ``A`` is an ``(m, sum n_j^2)`` matrix whose row ``i`` is the
    concatenation of the row-major flattened symmetric blocks of ``A_i``;
    ``C`` is flattened the same way.
    """

    blocks: list
    C: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.blocks = [int(n) for n in self.blocks]
        self.C = np.asarray(self.C, dtype=float).reshape(-1)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.A = np.asarray(self.A, dtype=float).reshape(self.b.size, -1)
        if self.A.shape[1] != self.vec_size or self.C.size != self.vec_size:
            raise ValueError("A and C must have sum(n_j^2) columns")

    @property
    def vec_size(self) -> int:
        return sum(n * n for n in self.blocks)

    @property
    def m(self) -> int:
        return self.b.size

    def slices(self) -> list:
        out, start = [], 0
        for n in self.blocks:
            out.append(slice(start, start + n * n))
            start += n * n
        return out

    def unpack(self, vec) -> list:
        return [np.asarray(vec[s]).reshape(n, n) for s, n in zip(self.slices(), self.blocks)]

    @staticmethod
    def pack(mats: Sequence) -> np.ndarray:
        return np.concatenate([np.asarray(M, dtype=float).reshape(-1) for M in mats])

    def constraint(self, i: int) -> list:
        return self.unpack(self.A[i])

    def objective_blocks(self) -> list:
        return self.unpack(self.C)

    @classmethod
    def from_blocks(cls, blocks, C_blocks, A_blocks, b) -> "SdpProblem":
        """Build from per-block dense matrices; ``None`` entries are zero."""
        blocks = [int(n) for n in blocks]

        def flat(mats):
            return np.concatenate([
                np.zeros(n * n) if M is None else np.asarray(M, dtype=float).reshape(-1)
                for M, n in zip(mats, blocks)])

        A = np.array([flat(row) for row in A_blocks]).reshape(len(A_blocks), -1)
        return cls(blocks, flat(C_blocks), A, b)


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.95
    step_floor: float = 1e-10
    infeas_tol: float = 1e-9
    refine_steps: int = 10
    stall_iter: int = 40
    dump_dir: Optional[str] = None


@dataclass
class PresolveReport:
    kept: np.ndarray
    dropped: list
    row_scale: np.ndarray
    infeasible: bool = False
    notes: list = field(default_factory=list)

    @property
    def identity(self) -> bool:
        return not self.dropped and np.allclose(self.row_scale, 1.0)


@dataclass
class SdpSolution:
    status: Status
    X: list
    y: np.ndarray
    S: list
    pobj: float
    dobj: float
    primal_res: float
    dual_res: float
    gap: float
    iterations: int
    ray: Optional[np.ndarray] = None
    presolve: Optional[PresolveReport] = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def presolve(p: SdpProblem, rank_tol: float = 1e-10):
    """Scale rows to unit Frobenius norm and drop dependent rows.

    Returns the reduced problem and a report; ``report.infeasible`` is set
    when a dropped row's right-hand side is inconsistent with the rest.
    """
    norms = np.linalg.norm(p.A, axis=1)
    notes = []
    zero = norms == 0.0
    infeasible = False
    for i in np.flatnonzero(zero):
        if p.b[i] != 0.0:
            infeasible = True
            notes.append(f"row {i} is zero with b={p.b[i]:.3g}")
        else:
            notes.append(f"row {i} is identically zero")
    scale = np.where(zero, 1.0, norms)
    A = p.A / scale[:, None]
    b = p.b / scale
    live = np.flatnonzero(~zero)
    if live.size:
        _, R, piv = sla.qr(A[live].T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > rank_tol * diag[0])) if diag.size else 0
        kept = np.sort(live[piv[:rank]])
    else:
        kept = live
    dropped = sorted(set(range(p.m)) - set(kept.tolist()))
    dep = [i for i in dropped if not zero[i]]
    if dep and kept.size:
        coef, *_ = np.linalg.lstsq(A[kept].T, A[dep].T, rcond=None)
        mismatch = np.abs(b[dep] - coef.T @ b[kept])
        for i, r in zip(dep, mismatch):
            notes.append(f"row {i} dependent, dropped (rhs mismatch {r:.2e})")
            if r > 1e-8 * (1.0 + abs(b[i])):
                infeasible = True
    report = PresolveReport(kept, dropped, scale, infeasible, notes)
    for note in notes:
        log.warning("presolve: %s", note)
    reduced = SdpProblem(p.blocks, p.C, A[kept], b[kept])
    return reduced, report


def _sym(M):
    return 0.5 * (M + M.T)


def _max_step(Linv, D):
    """Largest alpha with L L^T + alpha D still PSD (inf if unbounded)."""
    if D.shape[0] == 1:
        lam = D[0, 0] * Linv[0, 0] ** 2
    else:
        lam = np.linalg.eigvalsh(_sym(Linv @ D @ Linv.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _chol(M):
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None


def _inner(As, Bs):
    return float(sum(np.vdot(a, b) for a, b in zip(As, Bs)))


def _nt_scaling(X, S):
    """Per-block NT factors ``(L^-1, LS^-1, G, G^-1, W, v)`` or None on failure.

    ``X = L L^T``, ``S = LS LS^T``, ``W = G G^T`` is the scaling point with
    ``W S W = X`` and ``G^T S G = G^-1 X G^-T = diag(v)``.
    """
    out = []
    for Xj, Sj in zip(X, S):
        L = _chol(Xj)
        LS = _chol(Sj)
        if L is None or LS is None:
            return None
        lam, U = np.linalg.eigh(_sym(L.T @ Sj @ L))
        if lam[0] <= 0:
            return None
        q = lam ** -0.25
        G = (L @ U) * q
        Linv = sla.solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
        LSinv = sla.solve_triangular(LS, np.eye(L.shape[0]), lower=True, check_finite=False)
        Ginv = (U.T * (1.0 / q)[:, None]) @ Linv
        out.append((Linv, LSinv, G, Ginv, G @ G.T, np.sqrt(lam)))
    return out


def solve(problem: SdpProblem, opts: Optional[SolverOptions] = None) -> SdpSolution:
    """Solve ``problem``; see :class:`Status` for the possible outcomes.

    Works on the homogeneous self-dual embedding, so the iterates carry
    extra scalars ``tau, kappa >= 0`` and the reported point is
    ``(X, y, S) / tau``.  One common step length is used for all
    variables.  Deterministic: fixed initial point, no randomization.
    """
    opts = opts or SolverOptions()
    if opts.dump_dir:
        os.makedirs(opts.dump_dir, exist_ok=True)
        write_sdpa(problem, os.path.join(opts.dump_dir, f"sdp_{next(_dump_counter):05d}.dat-s"))
    p, report = presolve(problem)
    nblk = len(p.blocks)
    sl = p.slices()

    def finish(status, X, y, S, it, stats, ray=None):
        y_full = np.zeros(problem.m)
        y_full[report.kept] = y / report.row_scale[report.kept]
        ray_full = None
        if ray is not None:
            ray_full = np.zeros(problem.m)
            ray_full[report.kept] = ray / report.row_scale[report.kept]
        pobj, dobj, pres, dres, gap = stats
        return SdpSolution(status, X, y_full, S, pobj, dobj, pres, dres, gap, it,
                           ray_full, report)

    C = p.unpack(p.C)
    if report.infeasible:
        X = [np.zeros((n, n)) for n in p.blocks]
        return finish(Status.PRIMAL_INFEASIBLE, X, np.zeros(p.m), [c.copy() for c in C], 0,
                      (np.nan, np.nan, np.inf, np.inf, np.inf))

    A, b = p.A, p.b
    m = p.m
    ntot = sum(p.blocks)
    normb = np.linalg.norm(b)
    normC = np.linalg.norm(p.C)
    X = [np.eye(n) for n in p.blocks]
    S = [np.eye(n) for n in p.blocks]
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0

    def A_op(mats):
        return A @ SdpProblem.pack(mats)

    def At_op(v):
        return [_sym(M) for M in p.unpack(A.T @ v)]

    def stats_of(X, y, S, tau):
        Xh = [x / tau for x in X]
        Sh = [s / tau for s in S]
        yh = y / tau
        rp = b - A_op(Xh)
        Rd = [c - s - a for c, s, a in zip(C, Sh, At_op(yh))]
        pobj = _inner(C, Xh)
        dobj = float(b @ yh)
        pres = np.linalg.norm(rp) / (1.0 + normb)
        dres = np.sqrt(sum(np.sum(r * r) for r in Rd)) / (1.0 + normC)
        xs = _inner(Xh, Sh)
        gap = max(xs, abs(pobj - dobj)) / (1.0 + abs(pobj) + abs(dobj))
        return (pobj, dobj, pres, dres, gap)

    status = Status.MAX_ITERATIONS
    it = 0
    best = None
    progress_it = 0
    for it in range(opts.max_iter + 1):
        stats = stats_of(X, y, S, tau)
        pobj, dobj, pres, dres, gap = stats
        merit = max(pres, dres, gap)
        log.debug("it %3d  pobj %+.10e  dobj %+.10e  pres %.2e  dres %.2e  gap %.2e  tau %.2e  kappa %.2e",
                  it, pobj, dobj, pres, dres, gap, tau, kappa)
        if merit <= opts.tol:
            return finish(Status.OPTIMAL, [x / tau for x in X], y / tau,
                          [s / tau for s in S], it, stats)
        if best is None or merit < 0.9 * best[0]:
            progress_it = it
        if best is None or merit < best[0]:
            best = (merit, [x / tau for x in X], y / tau, [s / tau for s in S], it, stats)
        elif (merit > 1e3 * best[0] and best[0] <= 1e3 * opts.tol) or it - progress_it >= opts.stall_iter:
            status = Status.NUMERICAL_FAILURE
            break

        ray = _primal_infeasibility_ray(A, b, y, p, opts.infeas_tol)
        if ray is not None:
            return finish(Status.PRIMAL_INFEASIBLE, X, y, S, it, stats, ray=ray)
        if _dual_infeasible(A, C, X, opts.infeas_tol):
            return finish(Status.DUAL_INFEASIBLE, X, y, S, it, stats)
        if it == opts.max_iter:
            break

        scal = _nt_scaling(X, S)
        if scal is None:
            status = Status.NUMERICAL_FAILURE
            break
        Ls, LSs, Gs, Ginvs, Ws, vs = map(list, zip(*scal))

        Mschur = np.zeros((m, m))
        for j in range(nblk):
            Aj = A[:, sl[j]]
            if not Aj.any():
                continue
            Mschur += Aj @ np.kron(Ws[j], Ws[j]) @ Aj.T
        Mschur = _sym(Mschur)
        cf = None
        shift = 0.0
        base = max(np.abs(np.diag(Mschur)).max(initial=0.0), 1e-300)
        for _ in range(6):
            try:
                cf = sla.cho_factor(Mschur + shift * np.eye(m), lower=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                shift = base * (1e-14 if shift == 0 else shift / base * 100)
        if cf is None:
            status = Status.NUMERICAL_FAILURE
            break

        def schur_op(v):
            return A_op([W @ a @ W for W, a in zip(Ws, At_op(v))])

        def msolve(rhs):
            # refine against the unassembled operator until the residual
            # stops shrinking; the assembled matrix loses accuracy near the
            # optimum and may carry a regularizing shift
            z = sla.cho_solve(cf, rhs, check_finite=False)
            r = rhs - schur_op(z)
            rn = np.linalg.norm(r)
            for _ in range(opts.refine_steps):
                if rn <= 1e-14 * np.linalg.norm(rhs):
                    break
                z1 = z + sla.cho_solve(cf, r, check_finite=False)
                r1 = rhs - schur_op(z1)
                rn1 = np.linalg.norm(r1)
                if not rn1 < rn:
                    break
                z, r, rn, done = z1, r1, rn1, rn1 > 0.5 * rn
                if done:
                    break
            return z

        # homogeneous residuals
        rp = b * tau - A_op(X)
        Rd = [c * tau - a - s for c, a, s in zip(C, At_op(y), S)]
        rg = kappa - float(b @ y) + _inner(C, X)
        WCW = [W @ c @ W for W, c in zip(Ws, C)]
        aC = A_op(WCW)
        v = msolve(aC + b)
        cWc = _inner(C, WCW)
        WRdW = [W @ R @ W for W, R in zip(Ws, Rd)]
        ARdW = A_op(WRdW)
        CRdW = _inner(C, WRdW)

        def direction(Rc, rt, eta):
            u = msolve(eta * rp - A_op(Rc) + eta * ARdW)
            lhs = -cWc + aC @ v - b @ v - kappa / tau
            rhs = (-eta * rg - _inner(C, Rc) + eta * CRdW - aC @ u + b @ u - rt / tau)
            dtau = rhs / lhs
            dy = u + dtau * v
            dS = [_sym(eta * R + dtau * c - a) for R, c, a in zip(Rd, C, At_op(dy))]
            dX = [_sym(rc - W @ ds @ W) for rc, W, ds in zip(Rc, Ws, dS)]
            dkappa = (rt - kappa * dtau) / tau
            return dX, dy, dS, dtau, dkappa

        def step(dX, dS, dtau, dkappa):
            a = min([_max_step(L, d) for L, d in zip(Ls, dX)]
                    + [_max_step(L, d) for L, d in zip(LSs, dS)])
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        mu = (_inner(X, S) + tau * kappa) / (ntot + 1)
        dXa, dya, dSa, dta, dka = direction([-x for x in X], -tau * kappa, 1.0)
        aa = min(1.0, step(dXa, dSa, dta, dka))
        sigma = (1.0 - aa) ** 3

        def centering(second_order):
            Rc = []
            for j in range(nblk):
                vj = vs[j]
                rhs = sigma * mu * np.eye(vj.size) - np.diag(vj * vj)
                if second_order:
                    dXt = Ginvs[j] @ dXa[j] @ Ginvs[j].T
                    dSt = Gs[j].T @ dSa[j] @ Gs[j]
                    rhs = rhs - _sym(dXt @ dSt)
                Rt = 2.0 * rhs / (vj[:, None] + vj[None, :])
                Rc.append(_sym(Gs[j] @ Rt @ Gs[j].T))
            rt = sigma * mu - tau * kappa - (dta * dka if second_order else 0.0)
            return Rc, rt

        Rc, rt = centering(True)
        dX, dy, dS, dtau, dkappa = direction(Rc, rt, 1.0 - sigma)
        alpha = step(dX, dS, dtau, dkappa)
        if alpha < 0.1:
            Rc1, rt1 = centering(False)
            cand = direction(Rc1, rt1, 1.0 - sigma)
            a1 = step(cand[0], cand[2], cand[3], cand[4])
            if a1 > alpha:
                (dX, dy, dS, dtau, dkappa), alpha = cand, a1
        frac = opts.step_fraction
        alpha = min(1.0, frac * alpha)
        log.debug("      sigma %.2e  alpha %.3f", sigma, alpha)
        if alpha < opts.step_floor:
            status = Status.NUMERICAL_FAILURE
            break
        X = [_sym(x + alpha * d) for x, d in zip(X, dX)]
        S = [_sym(s + alpha * d) for s, d in zip(S, dS)]
        y = y + alpha * dy
        tau += alpha * dtau
        kappa += alpha * dkappa

    if best is not None and best[0] < max(stats_of(X, y, S, tau)[2:]):
        _, X, y, S, it, stats = best
        return finish(status, X, y, S, it, stats)
    return finish(status, [x / tau for x in X], y / tau, [s / tau for s in S], it,
                  stats_of(X, y, S, tau))


def _primal_infeasibility_ray(A, b, y, p, tol):
    """``y / b^T y`` if it is a Farkas ray: ``b^T y > 0`` and ``-A^T y >= 0``."""
    by = float(b @ y)
    if not by > 0:
        return None
    yh = y / by
    Z = p.unpack(-(A.T @ yh))
    lam = min(np.linalg.eigvalsh(_sym(z))[0] for z in Z)
    return yh if lam >= -tol else None


def _dual_infeasible(A, C, X, tol):
    cx = _inner(C, X)
    if not cx < 0:
        return False
    Xh = SdpProblem.pack(X) / -cx
    return bool(np.linalg.norm(A @ Xh) <= tol)


def check_solution(problem: SdpProblem, sol: SdpSolution) -> dict:
    """Recompute residuals of ``sol`` by direct substitution into ``problem``."""
    X = SdpProblem.pack(sol.X)
    rp = problem.A @ X - problem.b
    Smat = problem.C - problem.A.T @ sol.y
    S = problem.unpack(Smat)
    return {
        "primal_res": float(np.linalg.norm(rp) / (1.0 + np.linalg.norm(problem.b))),
        "dual_res": float(np.linalg.norm(Smat - SdpProblem.pack(sol.S))
                          / (1.0 + np.linalg.norm(problem.C))),
        "pobj": float(problem.C @ X),
        "dobj": float(problem.b @ sol.y),
        "min_eig_X": min(float(np.linalg.eigvalsh(_sym(x))[0]) for x in sol.X),
        "min_eig_S": min(float(np.linalg.eigvalsh(_sym(s))[0]) for s in S),
    }


def check_ray(problem: SdpProblem, ray) -> tuple:
    """Return ``(b^T ray, min eigenvalue of -A^T ray)`` for a Farkas ray."""
    Z = problem.unpack(-(problem.A.T @ ray))
    return float(problem.b @ ray), min(float(np.linalg.eigvalsh(_sym(z))[0]) for z in Z)


# ---------------------------------------------------------------------------
# SDPA sparse format


def write_sdpa(problem: SdpProblem, path) -> None:
    """Write ``problem`` in SDPA sparse format.

    SDPA's dual reads ``max <F0, Y> s.t. <Fi, Y> = c_i``, so ``F0 = -C``,
    ``Fi = A_i`` and ``c = b``; the optimal value is the negated primal
    objective of this module's convention.
    """
    lines = [f"{problem.m}", f"{len(problem.blocks)}",
             " ".join(str(n) for n in problem.blocks),
             " ".join(repr(float(v)) for v in problem.b)]
    mats = [[-M for M in problem.objective_blocks()]] + \
           [problem.constraint(i) for i in range(problem.m)]
    for k, blocks in enumerate(mats):
        for bi, M in enumerate(blocks):
            n = M.shape[0]
            for r in range(n):
                for c in range(r, n):
                    if M[r, c] != 0.0:
                        lines.append(f"{k} {bi + 1} {r + 1} {c + 1} {float(M[r, c])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sdpa(path) -> SdpProblem:
    with open(path) as fh:
        raw = [ln.split('"')[0].split("*")[0].strip() for ln in fh]
    raw = [ln.replace(",", " ").replace("{", " ").replace("}", " ") for ln in raw if ln]
    m = int(raw[0].split()[0])
    nb = int(raw[1].split()[0])
    blocks = [abs(int(v)) for v in raw[2].split()[:nb]]
    b = np.array([float(v) for v in raw[3].split()[:m]])
    Cb = [np.zeros((n, n)) for n in blocks]
    Ab = [[np.zeros((n, n)) for n in blocks] for _ in range(m)]
    for ln in raw[4:]:
        k, bi, r, c, val = ln.split()
        k, bi, r, c, val = int(k), int(bi) - 1, int(r) - 1, int(c) - 1, float(val)
        M = Cb[bi] if k == 0 else Ab[k - 1][bi]
        if k == 0:
            val = -val
        M[r, c] = M[c, r] = val
    return SdpProblem.from_blocks(blocks, Cb, Ab, b)
