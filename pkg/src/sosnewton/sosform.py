"""Sum-of-squares and sos-convexity programs.

Polynomials become coefficient-matching constraints on a PSD Gram matrix:

* ``p`` is sos iff ``p = phi^T Q phi`` with ``Q >= 0`` and ``phi`` the
  monomials of degree ``<= deg/2``;
* ``p`` is sos-convex iff ``y^T hess(p)(x) y = (phi(x) (x) y)^T Q (phi(x) (x) y)``
  with ``phi`` of degree ``<= deg/2 - 1`` (the biform is quadratic in ``y``).

On top of these sit the regularization-weight programs used by the Newton
drivers and the first-level moment relaxation that minimizes an sos-convex
polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from . import conicsolve
from .conicsolve import SdpProblem, SdpSolution, SolverOptions, Status
from .jets import min_eig
from .polycore import Polynomial, even_norm_power, monomial_basis, substitution_matrix

RESIDUAL_TOL = 1e-6
EIG_FLOOR = -1e-7
STATIONARITY_TOL = 1e-7
ACCEPT_TOL = 1e-6


class SosError(RuntimeError):
    """Base class for failures of the sos layer."""


class Infeasible(SosError):
    pass


class SolverFailure(SosError):
    def __init__(self, msg, solution: Optional[SdpSolution] = None):
        super().__init__(msg)
        self.solution = solution


class StationarityError(SosError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


# ---------------------------------------------------------------------------
# coefficient-matching patterns


@dataclass(frozen=True)
class MatchingPattern:
    """Linear map from a Gram matrix to polynomial coefficients.

    ``A[r]`` is the flattened symmetric 0/1 matrix whose inner product with
    ``Q`` gives the coefficient of monomial ``keys[r]``.
    """

    kind: str
    dim: int
    half_degree: int
    basis: tuple
    keys: tuple
    A: np.ndarray

    @property
    def size(self) -> int:
        return len(self.basis)

    def index(self) -> dict:
        return {k: i for i, k in enumerate(self.keys)}


def _pattern_from_pairs(kind, n, k, basis, keyfun) -> MatchingPattern:
    N = len(basis)
    rows: dict = {}
    for a in range(N):
        for b in range(N):
            rows.setdefault(keyfun(basis[a], basis[b]), []).append(a * N + b)
    keys = tuple(sorted(rows, key=_keysort))
    A = np.zeros((len(keys), N * N))
    for r, key in enumerate(keys):
        A[r, rows[key]] = 1.0
    A.setflags(write=False)
    return MatchingPattern(kind, n, k, tuple(basis), keys, A)


def _keysort(key):
    if isinstance(key[0], tuple):
        alpha, i, j = key
        return (sum(alpha), tuple(-a for a in alpha), i, j)
    return (sum(key), tuple(-a for a in key))


@lru_cache(maxsize=None)
def sos_pattern(n: int, k: int) -> MatchingPattern:
    basis = monomial_basis(n, k)
    return _pattern_from_pairs("sos", n, k, basis,
                               lambda a, b: tuple(x + y for x, y in zip(a, b)))


@lru_cache(maxsize=None)
def sosconvex_pattern(n: int, k: int) -> MatchingPattern:
    """Pattern on the Kronecker basis ``phi_k(x) (x) y`` (y index fastest)."""
    basis = [(beta, i) for beta in monomial_basis(n, k) for i in range(n)]

    def key(a, b):
        (ba, i), (bb, j) = a, b
        return (tuple(x + y for x, y in zip(ba, bb)), min(i, j), max(i, j))

    return _pattern_from_pairs("sosconvex", n, k, basis, key)


def biform_coefficients(p: Polynomial) -> dict:
    """Coefficients of ``y^T hess(p)(x) y`` keyed by ``(alpha, i, j)``, ``i <= j``."""
    H = p.hessian()
    out = {}
    for i in range(p.dim):
        for j in range(i, p.dim):
            mult = 1.0 if i == j else 2.0
            for alpha, c in H[i, j].terms.items():
                out[(alpha, i, j)] = mult * c
    return out


def target_vector(pattern: MatchingPattern, p: Polynomial) -> np.ndarray:
    coefs = biform_coefficients(p) if pattern.kind == "sosconvex" else p.terms
    idx = pattern.index()
    b = np.zeros(len(pattern.keys))
    for key, c in coefs.items():
        if key not in idx:
            raise ValueError(f"term {key} lies outside the Gram basis span")
        b[idx[key]] = c
    return b


@dataclass
class CoefficientMatching:
    """Affine constraints ``A vec(Q) = b`` for one polynomial."""

    pattern: MatchingPattern
    b: np.ndarray
    target: Polynomial

    @property
    def basis(self):
        return self.pattern.basis


def build_sos_constraint(p: Polynomial) -> CoefficientMatching:
    deg = p.degree()
    if deg % 2:
        raise ValueError(f"sos needs even degree, got {deg}")
    pat = sos_pattern(p.dim, deg // 2)
    return CoefficientMatching(pat, target_vector(pat, p), p)


def build_sosconvex_constraint(p: Polynomial, degree: Optional[int] = None) -> CoefficientMatching:
    """Biform matching for sos-convexity; ``degree`` overrides ``p.degree()``."""
    deg = p.degree() if degree is None else degree
    if deg % 2 or deg < 2:
        raise ValueError(f"sos-convexity needs even degree >= 2, got {deg}")
    pat = sosconvex_pattern(p.dim, deg // 2 - 1)
    return CoefficientMatching(pat, target_vector(pat, p), p)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class GramForm:
    kind: str
    basis: tuple
    gram: np.ndarray
    target: Polynomial

    def to_dict(self) -> dict:
        basis = ([[list(b), i] for b, i in self.basis] if self.kind == "sosconvex"
                 else [list(b) for b in self.basis])
        return {"kind": self.kind, "basis": basis, "gram": self.gram.tolist(),
                "target": self.target.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "GramForm":
        if d["kind"] == "sosconvex":
            basis = tuple((tuple(b), int(i)) for b, i in d["basis"])
        else:
            basis = tuple(tuple(b) for b in d["basis"])
        return cls(d["kind"], basis, np.array(d["gram"], dtype=float),
                   Polynomial.from_dict(d["target"]))


@dataclass
class SosConvexCertificate:
    polynomial: Polynomial
    gramform: GramForm
    min_eig: float

    def to_dict(self) -> dict:
        return {"gramform": self.gramform.to_dict(), "min_eig": self.min_eig}

    @classmethod
    def from_dict(cls, d) -> "SosConvexCertificate":
        g = GramForm.from_dict(d["gramform"])
        return cls(g.target, g, float(d["min_eig"]))


def _gram_expansion(kind: str, basis, Q) -> dict:
    out: dict = {}
    N = len(basis)
    for a in range(N):
        for b in range(N):
            if kind == "sosconvex":
                (ba, i), (bb, j) = basis[a], basis[b]
                key = (tuple(x + y for x, y in zip(ba, bb)), min(i, j), max(i, j))
            else:
                key = tuple(x + y for x, y in zip(basis[a], basis[b]))
            out[key] = out.get(key, 0.0) + Q[a, b]
    return out


def verify_certificate(cert: Union[SosConvexCertificate, GramForm]):
    """Independently re-check a Gram certificate.

    Returns ``(ok, report)``; ok iff the coefficient residual is at most
    ``1e-6 * max(1, |target|_inf)`` and the Gram matrix has no eigenvalue
    below ``-1e-7``.
    """
    g = cert.gramform if isinstance(cert, SosConvexCertificate) else cert
    Q = np.asarray(g.gram, dtype=float)
    sym_err = float(np.abs(Q - Q.T).max(initial=0.0))
    Q = 0.5 * (Q + Q.T)
    target = biform_coefficients(g.target) if g.kind == "sosconvex" else g.target.terms
    got = _gram_expansion(g.kind, g.basis, Q)
    keys = set(target) | set(got)
    resid = max((abs(target.get(k, 0.0) - got.get(k, 0.0)) for k in keys), default=0.0)
    scale = max(1.0, max((abs(v) for v in target.values()), default=0.0))
    lam = float(np.linalg.eigvalsh(Q)[0]) if Q.size else 0.0
    rel = resid / scale
    ok = rel <= RESIDUAL_TOL and lam >= EIG_FLOOR and sym_err <= RESIDUAL_TOL * scale
    return bool(ok), {"residual": rel, "min_eig": lam, "symmetry": sym_err}


# ---------------------------------------------------------------------------
# feasibility


@dataclass
class FeasibilityResult:
    feasible: bool
    status: Status
    gramform: Optional[GramForm]
    solution: SdpSolution


def _feasibility(match: CoefficientMatching, opts=None) -> FeasibilityResult:
    N = match.pattern.size
    prob = SdpProblem([N], np.zeros(N * N), match.pattern.A, match.b)
    sol = conicsolve.solve(prob, opts)
    gram = GramForm(match.pattern.kind, match.basis, sol.X[0], match.target) if sol.optimal else None
    return FeasibilityResult(sol.optimal, sol.status, gram, sol)


def check_sos(p: Polynomial, opts=None) -> FeasibilityResult:
    return _feasibility(build_sos_constraint(p), opts)


def check_sosconvex(p: Polynomial, degree: Optional[int] = None, opts=None) -> FeasibilityResult:
    return _feasibility(build_sosconvex_constraint(p, degree), opts)


@lru_cache(maxsize=None)
def norm_power_gram(n: int, m: int) -> np.ndarray:
    """A Gram matrix certifying sos-convexity of ``|x|^m``."""
    res = check_sosconvex(even_norm_power(n, [0.0] * n, m))
    if not res.feasible:
        raise SolverFailure(f"could not certify |x|^{m} in {n} variables", res.solution)
    Q = res.gramform.gram
    Q.setflags(write=False)
    return Q


def _usable(sol: SdpSolution) -> bool:
    """Optimal, or stalled close enough that the caller's own checks decide.

    Degenerate programs (a rank-deficient Gram matrix at the optimal weight,
    no strict complementarity) often stall just short of the solver
    tolerance; such iterates are kept when every residual is below
    ``ACCEPT_TOL`` and the certificate or stationarity check passes.
    """
    if sol.optimal:
        return True
    return (sol.status in (Status.NUMERICAL_FAILURE, Status.MAX_ITERATIONS)
            and max(sol.primal_res, sol.dual_res, sol.gap) <= ACCEPT_TOL)


# ---------------------------------------------------------------------------
# regularization weight


@dataclass
class WeightResult:
    """Optimal weight of ``base + weight * |x - center|^dprime`` (sos-convex)."""

    weight: float
    certificate: SosConvexCertificate
    solution: SdpSolution
    variable_map: np.ndarray  # x = B z used for the solve
    coef_scale: float


def _curvature_scales(p: Polynomial) -> float:
    """Variable scale balancing degree >= 3 terms against the quadratic part."""
    c2 = p.homogeneous_part(2).max_abs_coef()
    s = 1.0
    if c2 > 0:
        cands = []
        for k in range(3, p.degree() + 1):
            ck = p.homogeneous_part(k).max_abs_coef()
            if ck > 0:
                cands.append((c2 / ck) ** (1.0 / (k - 2)))
        if cands:
            s = min(cands)
    return s


def _weight_scale(curv: Polynomial, dprime: int) -> float:
    """Variable scale for the weight program.

    The optimal weight is governed by the softest curvature direction:
    with ``a`` the smallest quadratic coefficient along an eigenvector and
    ``s0 = min_k (a / c_k)^(1/(k-2))``, the weight is at most about
    ``t_est = a s0^(2-dprime)``.  Choosing ``s`` so that ``t_est s^dprime``
    matches the largest quadratic coefficient puts the weight, the cubic and
    higher terms and the stiff curvature on one scale; only the ratio of the
    soft to the stiff curvature remains, which is intrinsic to the problem.
    """
    n = curv.dim
    quad = curv.homogeneous_part(2)
    w = np.linalg.eigvalsh(quad.eval_hess(np.zeros(n))) / 2.0
    big = max(float(np.abs(w).max()), quad.max_abs_coef())
    a = float(w[0]) if w[0] > 1e-12 * big else big
    if not big > 0:
        return 1.0
    cands = []
    for k in range(3, curv.degree() + 1):
        ck = curv.homogeneous_part(k).max_abs_coef()
        if ck > 0:
            cands.append((a / ck) ** (1.0 / (k - 2)))
    if not cands:
        return 1.0
    t_est = a * min(cands) ** (2 - dprime)
    return (big / t_est) ** (1.0 / (dprime - 2))


def _repair_gram(pattern: MatchingPattern, Q: np.ndarray, target: Polynomial,
                 margin: float = 1e-12, rounds: int = 3) -> np.ndarray:
    """Round a numerical Gram matrix into a cleaner certificate.

    Alternates the least-norm correction onto ``A vec(Q) = b`` with
    lifting eigenvalues to ``margin * |Q|``; the last operation is the
    eigenvalue lift, so the result is PSD to working precision while the
    coefficient residual stays at rounding level.  A matrix that is far
    from PSD comes back with a large residual and still fails
    verification.
    """
    A = pattern.A
    b = target_vector(pattern, target)
    rn = np.einsum("ij,ij->i", A, A)
    rn[rn == 0] = 1.0
    N = Q.shape[0]
    Q = 0.5 * (Q + Q.T)
    for _ in range(rounds):
        r = b - A @ Q.reshape(-1)
        Q = Q + (A.T @ (r / rn)).reshape(N, N)
        Q = 0.5 * (Q + Q.T)
        w, V = np.linalg.eigh(Q)
        floor = margin * max(np.abs(w).max(initial=0.0), 1.0)
        if w[0] >= floor:
            break
        Q = (V * np.maximum(w, floor)) @ V.T
        Q = 0.5 * (Q + Q.T)
    return Q


def _min_weight(base: Polynomial, dprime: int, opts=None) -> WeightResult:
    n = base.dim
    if base.degree() > dprime:
        raise ValueError("regularizer degree must be at least the polynomial degree")
    # Only the Hessian matters, so affine terms are dropped.  The program is
    # solved in z with x = s z: sos-convexity is invariant under linear
    # changes of variables, and s balances the quadratic part against the
    # regularizer so the scaled weight is of order one.
    curv = Polynomial(n, {a: c for a, c in base.terms.items() if sum(a) >= 2})
    B = _weight_scale(curv, dprime) * np.eye(n)
    cz = curv.linear_change(B)
    c = cz.max_abs_coef() or 1.0
    scaled = cz.scale(1.0 / c)
    reg = even_norm_power(n, [0.0] * n, dprime).linear_change(B)
    rho = reg.max_abs_coef()
    match = build_sosconvex_constraint(scaled, dprime)
    N = match.pattern.size
    col = target_vector(match.pattern, reg) / rho
    A = np.hstack([match.pattern.A, -col[:, None]])
    C = np.zeros(N * N + 1)
    C[-1] = 1.0
    prob = SdpProblem([N, 1], C, A, match.b)
    sol = conicsolve.solve(prob, opts)
    if sol.status is Status.PRIMAL_INFEASIBLE:
        raise Infeasible("no regularization weight makes the polynomial sos-convex")
    if not _usable(sol):
        raise SolverFailure(f"weight program ended with {sol.status.value}", sol)
    weight = max(float(sol.X[1][0, 0]), 0.0) * c / rho
    # back to x: phi(z) (x) w = (L (x) R)(phi(x) (x) y) with R = B^-1
    R = np.linalg.inv(B)
    k = dprime // 2 - 1
    K = np.kron(substitution_matrix(n, k, R), R)
    Qx = c * (K.T @ sol.X[0] @ K)
    cert = None
    if 0.0 < sol.X[1][0, 0] <= ACCEPT_TOL:
        # a weight at solver-tolerance level: keep zero if its certificate holds
        Q = _repair_gram(match.pattern, Qx, base)
        trial = SosConvexCertificate(base, GramForm("sosconvex", match.basis, Q, base),
                                     float(np.linalg.eigvalsh(Q)[0]))
        if verify_certificate(trial)[0]:
            weight, cert = 0.0, trial
    if cert is None:
        surrogate = base + even_norm_power(n, [0.0] * n, dprime).scale(weight)
        Q = _repair_gram(match.pattern, Qx, surrogate)
        gram = GramForm("sosconvex", match.basis, Q, surrogate)
        cert = SosConvexCertificate(surrogate, gram, float(np.linalg.eigvalsh(Q)[0]))
    if not sol.optimal and not verify_certificate(cert)[0]:
        raise SolverFailure(f"weight program ended with {sol.status.value} and its "
                            "certificate does not verify", sol)
    return WeightResult(weight, cert, sol, B, c)


def _check_center_convexity(Tc: Polynomial, tol: float = 1e-12):
    """Exact obstructions to sos-convexity visible at the origin.

    The regularizer vanishes to second order at the center when its
    degree exceeds 2, so the Hessian there must be PSD, and along any null
    direction ``v`` the cubic form ``D^3 T[v, v, .]`` must vanish.
    """
    n = Tc.dim
    H = Tc.eval_hess(np.zeros(n))
    scale = max(1.0, Tc.max_abs_coef())
    w, V = np.linalg.eigh(H)
    if w[0] < -tol * scale:
        raise Infeasible(f"Hessian at the center has eigenvalue {w[0]:.3g} < 0")
    null = V[:, np.abs(w) <= tol * scale]
    if null.size:
        for v in null.T:
            dir_hess = [sum(v[i] * v[j] * Tc.differentiate(i).differentiate(j).differentiate(k)
                            .eval(np.zeros(n)) for i in range(n) for j in range(n))
                        for k in range(n)]
            if np.linalg.norm(dir_hess) > tol * scale:
                raise Infeasible("Hessian is singular at the center with a nonzero "
                                 "third-order term along the null direction")


def min_t(T: Polynomial, center, dprime: int, opts: Optional[SolverOptions] = None) -> WeightResult:
    """Smallest ``t >= 0`` making ``T + t |x - center|^dprime`` sos-convex.

    Computed after translating ``center`` to the origin; the returned
    certificate is in those centered coordinates.
    """
    if dprime % 2 or dprime <= 2:
        raise ValueError("dprime must be an even integer > 2")
    Tc = T.translate(np.asarray(center, dtype=float))
    _check_center_convexity(Tc)
    return _min_weight(Tc, dprime, opts)


def min_t_bar(T: Polynomial, center, eps: float, lam_min: float, dprime: int,
              opts: Optional[SolverOptions] = None) -> WeightResult:
    """Smallest ``tbar >= 0`` making the eps-shifted surrogate sos-convex.

    The surrogate is ``T + (eps - lam_min)/2 |x-c|^2 + tbar |x-c|^dprime``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = T.dim
    Tc = T.translate(np.asarray(center, dtype=float))
    shifted = Tc + even_norm_power(n, [0.0] * n, 2).scale(0.5 * (eps - lam_min))
    return _min_weight(shifted, dprime, opts)


def fixed_weight_certificate(base: WeightResult, weight: float, dprime: int) -> SosConvexCertificate:
    """Certificate for a weight above the optimum: add a multiple of the norm-power Gram."""
    extra = weight - base.weight
    if extra < 0:
        raise ValueError("weight below the certified optimum")
    n = base.certificate.polynomial.dim
    g = base.certificate.gramform
    Q = g.gram + extra * norm_power_gram(n, dprime)
    target = base.certificate.polynomial + even_norm_power(n, [0.0] * n, dprime).scale(extra)
    gram = GramForm("sosconvex", g.basis, Q, target)
    return SosConvexCertificate(target, gram, float(np.linalg.eigvalsh(Q)[0]))


# ---------------------------------------------------------------------------
# moment relaxation


@dataclass
class LasserreSolution:
    gamma_star: float
    minimizer: np.ndarray
    moment_matrix: np.ndarray
    moment_point: np.ndarray
    stationarity: float
    moment_stationarity: float
    gramform: GramForm
    solution: SdpSolution
    diagnostics: dict = field(default_factory=dict)


def _moment_scale(psi: Polynomial) -> float:
    """Rough size of the minimizer: root estimate of the radial majorant."""
    n = psi.dim
    z = np.zeros(n)
    g = psi.eval_grad(z)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return _curvature_scales(psi)
    cands = []
    H = psi.eval_hess(z)
    try:
        w = np.linalg.eigvalsh(H)
        if w[0] > 0:
            cands.append(float(np.linalg.norm(np.linalg.solve(H, g))))
    except np.linalg.LinAlgError:
        pass
    for k in range(3, psi.degree() + 1):
        ck = psi.homogeneous_part(k).max_abs_coef()
        if ck > 0:
            cands.append((gn / (k * ck)) ** (1.0 / (k - 1)))
    s = min(cands) if cands else 1.0
    return s if s > 0 and math.isfinite(s) else 1.0


def stationarity_residual(psi: Polynomial, x) -> float:
    """``|grad psi(x)|`` relative to ``max(1, largest non-constant coefficient)``."""
    ref = max(1.0, psi.max_abs_coef(skip_constant=True))
    return float(np.linalg.norm(psi.eval_grad(x))) / ref


def _polish(psi: Polynomial, x: np.ndarray, max_steps: int = 60):
    grads = psi.gradient()
    hess = psi.hessian()

    def grad(v):
        return np.array([gi.eval(v) for gi in grads])

    g = grad(x)
    steps = 0
    for _ in range(max_steps):
        gn = np.linalg.norm(g)
        if gn == 0.0:
            break
        try:
            step = np.linalg.solve(hess.eval(x), -g)
        except np.linalg.LinAlgError:
            break
        xn = x + step
        gnew = grad(xn)
        if not np.linalg.norm(gnew) < gn:
            break
        x, g = xn, gnew
        steps += 1
    return x, steps


def lasserre_minimize(psi: Polynomial, opts: Optional[SolverOptions] = None,
                      polish: bool = True,
                      stationarity_tol: float = STATIONARITY_TOL) -> LasserreSolution:
    """Minimize an sos-convex polynomial with the first-level moment relaxation.

    Solves ``sup gamma s.t. psi - gamma sos`` and reads the minimizer off
    the degree-one moments of the dual.  The program is posed in ``z`` with
    ``x = s z``, where ``s`` is the expected size of the minimizer.

    With ``polish`` the moment point is refined by safeguarded Newton steps
    on ``psi`` (a convex polynomial), and both points are reported.  Raises
    :class:`StationarityError` when the final point is not stationary to
    ``stationarity_tol`` (see :func:`stationarity_residual`).
    """
    deg = psi.degree()
    if deg % 2 or deg < 2:
        raise ValueError(f"need an even degree >= 2, got {deg}")
    n = psi.dim
    B = _moment_scale(psi) * np.eye(n)
    pz = psi.linear_change(B)
    c = pz.max_abs_coef(skip_constant=True) or 1.0
    scaled = pz.scale(1.0 / c)

    pat = sos_pattern(n, deg // 2)
    b = target_vector(pat, scaled)
    N = pat.size
    # the constant-monomial row fixes gamma; drop it and minimize Q_00 instead
    zero = (0,) * n
    rows = [r for r, k in enumerate(pat.keys) if k != zero]
    Cmat = np.zeros(N * N)
    Cmat[0] = 1.0
    prob = SdpProblem([N], Cmat, pat.A[rows], b[rows])
    sol = conicsolve.solve(prob, opts)
    if not _usable(sol):
        raise SolverFailure(f"moment relaxation ended with {sol.status.value}", sol)

    gamma = c * (scaled.coef(zero) - float(sol.X[0][0, 0]))
    moments = {zero: 1.0}
    for r, yv in zip(rows, sol.y):
        moments[pat.keys[r]] = -yv
    basis = pat.basis
    Mz = np.array([[moments[tuple(x + y for x, y in zip(a, bb))] for bb in basis] for a in basis])
    # phi(x) = phi(B z) = L_B phi(z), so moments map by congruence
    LB = substitution_matrix(n, deg // 2, B)
    Mmat = LB @ Mz @ LB.T
    Mmat = 0.5 * (Mmat + Mmat.T)
    xm = Mmat[0, 1:1 + n].copy()

    LR = substitution_matrix(n, deg // 2, np.linalg.inv(B))
    Q = _repair_gram(pat, c * (LR.T @ sol.X[0] @ LR), psi - gamma)
    gram = GramForm("sos", basis, Q, psi - gamma)

    stat_m = stationarity_residual(psi, xm)
    x = xm
    nsteps = 0
    if polish:
        x, nsteps = _polish(psi, xm.copy())
    stat = stationarity_residual(psi, x)
    out = LasserreSolution(gamma, x, Mmat, xm, stat, stat_m, gram, sol,
                           {"variable_map": B, "coef_scale": c, "polish_steps": nsteps,
                            "polish_shift": float(np.linalg.norm(x - xm)),
                            "gap": psi.eval(x) - gamma})
    if not stat <= stationarity_tol:
        raise StationarityError(f"minimizer not stationary (|grad|/scale = {stat:.3g})", out)
    return out


# ---------------------------------------------------------------------------
# quadrature bound for polynomial matrices


def quadrature_psd_gap(coeffs, alpha: int) -> float:
    """Smallest eigenvalue of ``int_0^1 M - M(alpha) / (2 (d^2 - 1))``.

    ``coeffs[k]`` is the matrix coefficient of ``s^k`` in ``M(s)`` and ``d``
    is the smallest even integer >= max(2, degree).  Nonnegative whenever
    ``M(s)`` is PSD on ``[0, 1]``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    nz = [k for k in range(coeffs.shape[0]) if np.any(coeffs[k])]
    deg = max(nz, default=0)
    d = max(2, deg + (deg % 2))
    integral = sum(coeffs[k] / (k + 1) for k in range(coeffs.shape[0]))
    at = sum(coeffs[k] * float(alpha) ** k for k in range(coeffs.shape[0]))
    G = integral - at / (2.0 * (d * d - 1))
    return min_eig(0.5 * (G + G.T))
