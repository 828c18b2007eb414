"""Higher-order Newton drivers.

Each step of the order-``d`` method expands ``f`` to order ``d`` at the
current iterate, adds the smallest multiple of ``|x - x_k|^d'`` that makes
the expansion sos-convex (one SDP), and jumps to the minimizer of the
resulting surrogate (a second SDP).  ``d'`` is the smallest even integer
above ``d``.  When the Hessian at ``x_k`` is not positive definite, the
expansion is first shifted by ``(eps - lambda_min)/2 |x - x_k|^2``.

The globally convergent variant (odd ``d``) uses the weight
``max(d M / (d+1)!, t)`` with ``M`` a Lipschitz bound on ``D^d f``, which
makes the surrogate an upper bound on ``f`` and the iteration monotone.

All polynomial work happens in coordinates centered at ``x_k``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from . import sosform
from .conicsolve import SolverOptions
from .jets import FunctionOracle, min_eig_hessian, taylor_expand
from .polycore import Polynomial

log = logging.getLogger(__name__)

BRANCH_PD = "PD"
BRANCH_SHIFTED = "Shifted"
BRANCH_GLOBAL = "Global"
BRANCH_CLASSICAL = "Classical"

GRAD_TOL = 1e-10
MAX_ITER = 100
DIVERGENCE_NORM = 1e8
NEAR_SINGULAR = 1e-12


class PreconditionError(ValueError):
    """A driver was called outside the assumptions it relies on."""


class StepFailure(RuntimeError):
    """A step could not be completed; ``report`` holds what was computed."""

    def __init__(self, msg, report=None, cause=None):
        super().__init__(msg)
        self.report = report
        self.cause = cause


def regularizer_degree(d: int) -> int:
    """Smallest even integer strictly greater than ``d``."""
    return d + 1 if d % 2 else d + 2


@dataclass
class StepReport:
    """One iteration of a surrogate-based method.

    ``taylor_local`` and ``surrogate_local`` are in the displacement
    ``x - center``; ``taylor`` and ``surrogate`` translate them back.
    """

    center: np.ndarray
    branch: str
    taylor_local: Polynomial
    t_or_tbar: float
    eps_used: Optional[float]
    dprime: int
    surrogate_local: Polynomial
    next: np.ndarray
    certificate: Optional[sosform.SosConvexCertificate] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def taylor(self) -> Polynomial:
        return self.taylor_local.translate(-self.center)

    @property
    def surrogate(self) -> Polynomial:
        return self.surrogate_local.translate(-self.center)

    @property
    def local_minimizer(self) -> np.ndarray:
        return self.next - self.center

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "branch": self.branch,
            "taylor_local": self.taylor_local.to_dict(),
            "t": self.t_or_tbar,
            "eps": self.eps_used,
            "dprime": self.dprime,
            "surrogate_local": self.surrogate_local.to_dict(),
            "next": self.next.tolist(),
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "diagnostics": _jsonable(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d) -> "StepReport":
        cert = d.get("certificate")
        return cls(np.array(d["center"], dtype=float), d["branch"],
                   Polynomial.from_dict(d["taylor_local"]), d["t"], d["eps"], d["dprime"],
                   Polynomial.from_dict(d["surrogate_local"]), np.array(d["next"], dtype=float),
                   None if cert is None else sosform.SosConvexCertificate.from_dict(cert),
                   dict(d.get("diagnostics", {})))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


@dataclass
class Trace:
    """Iterate history of one run."""

    method: str
    order: int
    iterates: list = field(default_factory=list)
    values: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    termination: str = ""
    message: str = ""

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def n_steps(self) -> int:
        return len(self.iterates) - 1

    def append(self, x, f: FunctionOracle):
        val, g, _ = f.value_grad_hess(x)
        self.iterates.append(np.asarray(x, dtype=float).copy())
        self.values.append(float(val))
        self.grad_norms.append(float(np.linalg.norm(g)))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "order": self.order,
            "termination": self.termination,
            "message": self.message,
            "iterates": [x.tolist() for x in self.iterates],
            "values": self.values,
            "grad_norms": self.grad_norms,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d) -> "Trace":
        return cls(d["method"], d["order"], [np.array(x, dtype=float) for x in d["iterates"]],
                   list(d["values"]), list(d["grad_norms"]),
                   [StepReport.from_dict(s) for s in d["steps"]], d["termination"],
                   d.get("message", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Trace":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """Rows ``k, x_1..x_n, f, grad_norm, t, branch`` with 17 significant digits."""
        n = len(self.iterates[0]) if self.iterates else 0
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k"] + [f"x{i + 1}" for i in range(n)] + ["f", "grad_norm", "t", "branch"])
        for k, x in enumerate(self.iterates):
            step = self.steps[k] if k < len(self.steps) else None
            t = "" if step is None else fmt(step.t_or_tbar)
            branch = "" if step is None else step.branch
            w.writerow([k] + [fmt(v) for v in x] + [fmt(self.values[k]), fmt(self.grad_norms[k]),
                                                    t, branch])
        return buf.getvalue()


def fmt(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# steps


def _finish_step(f, x, branch, T, weight, eps, dprime, cert, wres, opts, extra):
    psi = cert.polynomial
    try:
        sol = sosform.lasserre_minimize(psi, opts)
    except sosform.SosError as exc:
        report = StepReport(x, branch, T, weight, eps, dprime, psi, x.copy(), cert, dict(extra))
        raise StepFailure(f"surrogate minimization failed: {exc}", report, exc) from exc
    nxt = x + sol.minimizer
    ok, res = sosform.verify_certificate(cert)
    diag = dict(extra)
    diag.update({
        "certificate_ok": ok,
        "certificate_residual": res["residual"],
        "gram_min_eig": res["min_eig"],
        "stationarity": sol.stationarity,
        "moment_stationarity": sol.moment_stationarity,
        "gamma": sol.gamma_star,
        "weight_iterations": wres.solution.iterations,
        "moment_iterations": sol.solution.iterations,
        "polish_steps": sol.diagnostics["polish_steps"],
    })
    return StepReport(x, branch, T, weight, eps, dprime, psi, nxt, cert, diag)


def step_order_d(f: FunctionOracle, x_k, d: int, eps: float = 0.01,
                 opts: Optional[SolverOptions] = None) -> StepReport:
    """One iteration of the order-``d`` surrogate Newton method.

    Parameters
    ----------
    f : FunctionOracle
    x_k : array_like
        Current iterate.
    d : int
        Taylor order, at least 3.
    eps : float
        Curvature floor used when the Hessian at ``x_k`` is not positive
        definite.

    Raises
    ------
    StepFailure
        When either SDP fails; the partial report is attached.
    """
    if d < 3:
        raise ValueError("order must be at least 3 (use classical_newton_step for d=2)")
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x_k, dtype=float).reshape(-1).copy()
    n = f.dim
    dprime = regularizer_degree(d)
    T = taylor_expand(f, x, d, centered=True)
    lam = min_eig_hessian(f, x)
    extra = {"lambda_min": lam, "near_singular": bool(0.0 < lam <= NEAR_SINGULAR)}
    origin = np.zeros(n)
    try:
        if lam > 0.0:
            branch, eps_used = BRANCH_PD, None
            wres = sosform.min_t(T, origin, dprime, opts)
        else:
            branch, eps_used = BRANCH_SHIFTED, eps
            wres = sosform.min_t_bar(T, origin, eps, lam, dprime, opts)
    except sosform.SosError as exc:
        report = StepReport(x, BRANCH_PD if lam > 0 else BRANCH_SHIFTED, T, math.nan,
                            None if lam > 0 else eps, dprime, T, x.copy(), None, extra)
        raise StepFailure(f"weight program failed: {exc}", report, exc) from exc
    return _finish_step(f, x, branch, T, wres.weight, eps_used, dprime, wres.certificate,
                        wres, opts, extra)


def step_global(f: FunctionOracle, x_k, d: int, M: float,
                opts: Optional[SolverOptions] = None) -> StepReport:
    """One monotone step with weight ``max(d M / (d+1)!, t(x_k))``.

    Requires odd ``d``, ``M`` at least the Lipschitz constant of ``D^d f``
    and a positive definite Hessian at ``x_k``.
    """
    if d < 3 or d % 2 == 0:
        raise ValueError("the monotone variant needs an odd order d >= 3")
    if not M >= 0:
        raise ValueError("M must be a nonnegative Lipschitz bound")
    x = np.asarray(x_k, dtype=float).reshape(-1).copy()
    n = f.dim
    dprime = d + 1
    T = taylor_expand(f, x, d, centered=True)
    lam = min_eig_hessian(f, x)
    if not lam > 0:
        raise PreconditionError(f"Hessian at the iterate is not positive definite "
                                f"(lambda_min = {lam:.3g})")
    try:
        wres = sosform.min_t(T, np.zeros(n), dprime, opts)
    except sosform.Infeasible as exc:
        raise PreconditionError(f"no sos-convex regularization exists: {exc}") from exc
    except sosform.SosError as exc:
        report = StepReport(x, BRANCH_GLOBAL, T, math.nan, None, dprime, T, x.copy())
        raise StepFailure(f"weight program failed: {exc}", report, exc) from exc
    floor = d * M / math.factorial(d + 1)
    weight = max(floor, wres.weight)
    cert = wres.certificate
    if weight > wres.weight:
        cert = sosform.fixed_weight_certificate(wres, weight, dprime)
    extra = {"lambda_min": lam, "t_min": wres.weight, "lipschitz_floor": floor}
    report = _finish_step(f, x, BRANCH_GLOBAL, T, weight, None, dprime, cert, wres, opts, extra)
    f0, f1 = f.value(x), f.value(report.next)
    report.diagnostics["decrease"] = f0 - f1
    report.diagnostics["monotone"] = bool(f1 <= f0 + 1e-10 * max(1.0, abs(f0)))
    return report


def classical_newton_step(f: FunctionOracle, x_k) -> np.ndarray:
    """``x_k - H^{-1} g`` by a symmetric solve; raises ``LinAlgError`` if singular."""
    x = np.asarray(x_k, dtype=float).reshape(-1)
    _, g, H = f.value_grad_hess(x)
    step = sla.solve(H, g, assume_a="sym")
    if not np.all(np.isfinite(step)):
        raise np.linalg.LinAlgError("singular Hessian")
    return x - step


# ---------------------------------------------------------------------------
# drivers


def _drive(f: FunctionOracle, x0, stepper: Callable, trace: Trace,
           grad_tol: float, max_iter: int) -> Trace:
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.size != f.dim:
        raise ValueError(f"{f.name} expects a point of length {f.dim}")
    trace.append(x, f)
    for k in range(max_iter + 1):
        if trace.grad_norms[-1] <= grad_tol:
            trace.termination = "GradTol"
            return trace
        if k == max_iter:
            break
        try:
            nxt, report = stepper(x)
        except StepFailure as exc:
            if exc.report is not None:
                trace.steps.append(exc.report)
            trace.termination = "SolverFailure"
            trace.message = str(exc)
            return trace
        except np.linalg.LinAlgError as exc:
            trace.termination = "SolverFailure"
            trace.message = f"singular Hessian: {exc}"
            return trace
        if report is not None:
            trace.steps.append(report)
        if not np.all(np.isfinite(nxt)) or np.linalg.norm(nxt) > DIVERGENCE_NORM:
            if np.all(np.isfinite(nxt)):
                trace.append(nxt, f)
            trace.termination = "Diverged"
            return trace
        x = nxt
        trace.append(x, f)
    trace.termination = "MaxIter"
    return trace


def minimize(f: FunctionOracle, x0, d: int, eps: float = 0.01, grad_tol: float = GRAD_TOL,
             max_iter: int = MAX_ITER, opts: Optional[SolverOptions] = None) -> Trace:
    """Run the order-``d`` surrogate Newton method from ``x0``."""

    def stepper(x):
        rep = step_order_d(f, x, d, eps, opts)
        return rep.next, rep

    return _drive(f, x0, stepper, Trace("hon", d), grad_tol, max_iter)


def minimize_global(f: FunctionOracle, x0, d: int, M: Optional[float] = None,
                    grad_tol: float = GRAD_TOL, max_iter: int = MAX_ITER,
                    opts: Optional[SolverOptions] = None) -> Trace:
    """Run the monotone order-``d`` method; ``M`` defaults to ``f.lipschitz[d]``."""
    if M is None:
        if d not in f.lipschitz:
            raise PreconditionError(f"no Lipschitz bound for order {d} on {f.name}")
        M = f.lipschitz[d]

    def stepper(x):
        rep = step_global(f, x, d, M, opts)
        return rep.next, rep

    return _drive(f, x0, stepper, Trace("global", d), grad_tol, max_iter)


def minimize_classical(f: FunctionOracle, x0, grad_tol: float = GRAD_TOL,
                       max_iter: int = MAX_ITER) -> Trace:
    """Plain Newton iteration; the baseline for the order-2 entries."""

    def stepper(x):
        return classical_newton_step(f, x), None

    return _drive(f, x0, stepper, Trace("classical", 2), grad_tol, max_iter)


# ---------------------------------------------------------------------------
# diagnostics


def empirical_order(trace: Trace, xstar, lo: float = 1e-13, hi: float = 1e-1,
                    fit: str = "origin") -> float:
    """Estimate the convergence exponent from consecutive errors.

    Uses the pairs ``(e_k, e_{k+1})`` with both errors in ``(lo, hi)``.
    ``fit="origin"`` is the least-squares slope of ``log e_{k+1} = p log e_k``
    (the usual ``log e_{k+1} / log e_k`` estimate, one pair suffices);
    ``fit="affine"`` also fits ``log c`` and needs two pairs.
    """
    xstar = np.asarray(xstar, dtype=float).reshape(-1)
    errs = [float(np.linalg.norm(np.asarray(x) - xstar)) for x in trace.iterates]
    pairs = [(a, b) for a, b in zip(errs, errs[1:]) if lo < a < hi and lo < b < hi]
    need = 2 if fit == "affine" else 1
    if fit not in ("origin", "affine"):
        raise ValueError(f"unknown fit {fit!r}")
    if len(pairs) < need:
        raise ValueError(f"need {need} error pair(s) in ({lo:g}, {hi:g}), got {len(pairs)}")
    u = np.log([a for a, _ in pairs])
    v = np.log([b for _, b in pairs])
    if fit == "affine":
        return float(np.polyfit(u, v, 1)[0])
    return float(u @ v / (u @ u))


def check_step(report: StepReport, f: FunctionOracle, tol: float = 1e-9) -> dict:
    """Re-derive the per-step invariants from a report.

    Value and gradient of the surrogate must match ``f`` at the center; on
    the PD branch the Hessian must match as well, on the shifted branch it
    is offset by ``(eps - lambda_min) I``.
    """
    n = f.dim
    z = np.zeros(n)
    psi = report.surrogate_local
    val, g, H = f.value_grad_hess(report.center)
    scale = max(1.0, abs(val), float(np.abs(H).max()))
    Hs = psi.eval_hess(z)
    if report.branch == BRANCH_SHIFTED:
        H = H + (report.eps_used - report.diagnostics["lambda_min"]) * np.eye(n)
    out = {
        "value": abs(psi.eval(z) - val) / scale,
        "gradient": float(np.linalg.norm(psi.eval_grad(z) - g)) / scale,
        "hessian": float(np.abs(Hs - H).max()) / scale,
        "stationarity": sosform.stationarity_residual(psi, report.local_minimizer),
    }
    hess_checked = report.dprime > 2
    out["ok"] = bool(out["value"] <= tol and out["gradient"] <= tol
                     and (not hess_checked or out["hessian"] <= tol)
                     and out["stationarity"] <= sosform.STATIONARITY_TOL)
    return out
