"""Truncated multivariate Taylor series and the built-in test objectives.

A :class:`Jet` stores the Taylor coefficients of a function about a fixed
point, indexed by the graded-lex monomial basis of degree ``order``.  The
coefficient of ``s^alpha`` is ``d^alpha f / alpha!``, so the jet read as a
polynomial in the displacement ``s = x - xbar`` *is* the Taylor polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .polycore import Polynomial, monomial_basis


@lru_cache(maxsize=None)
def _product_table(n: int, d: int):
    basis = monomial_basis(n, d)
    index = {a: i for i, a in enumerate(basis)}
    left, right, dest = [], [], []
    for i, a in enumerate(basis):
        for j, b in enumerate(basis):
            if sum(a) + sum(b) <= d:
                left.append(i)
                right.append(j)
                dest.append(index[tuple(x + y for x, y in zip(a, b))])
    return np.array(left), np.array(right), np.array(dest)


class Jet:
    """Order-``order`` Taylor jet in ``dim`` variables."""

    __slots__ = ("dim", "order", "coeffs")

    def __init__(self, dim: int, order: int, coeffs):
        self.dim = dim
        self.order = order
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (len(monomial_basis(dim, order)),):
            raise ValueError("coefficient vector has the wrong length")

    @classmethod
    def constant(cls, dim: int, order: int, c: float) -> "Jet":
        out = np.zeros(len(monomial_basis(dim, order)))
        out[0] = c
        return cls(dim, order, out)

    @classmethod
    def variable(cls, dim: int, order: int, i: int, value: float) -> "Jet":
        """The coordinate function ``x_i`` expanded about ``x_i = value``."""
        out = np.zeros(len(monomial_basis(dim, order)))
        out[0] = value
        if order >= 1:
            out[1 + i] = 1.0
        return cls(dim, order, out)

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            if (other.dim, other.order) != (self.dim, self.order):
                raise ValueError("jets must share dim and order")
            return other
        return Jet.constant(self.dim, self.order, float(other))

    def __add__(self, other):
        other = self._lift(other)
        return Jet(self.dim, self.order, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.dim, self.order, -self.coeffs)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.dim, self.order, self.coeffs * float(other))
        other = self._lift(other)
        left, right, dest = _product_table(self.dim, self.order)
        prod = np.bincount(dest, weights=self.coeffs[left] * other.coeffs[right],
                           minlength=self.coeffs.size)
        return Jet(self.dim, self.order, prod)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / float(other))
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return self._lift(other) * reciprocal(self)

    def __pow__(self, k):
        return powi(self, k)

    def truncate(self, order: int) -> "Jet":
        keep = len(monomial_basis(self.dim, order))
        return Jet(self.dim, order, self.coeffs[:keep].copy())

    def to_polynomial(self) -> Polynomial:
        """The jet as a polynomial in the displacement from the expansion point."""
        return Polynomial.from_coefficients(self.dim, monomial_basis(self.dim, self.order),
                                            self.coeffs)

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, {self.coeffs!r})"


def compose(series: Sequence[float], a: Jet) -> Jet:
    """Evaluate ``sum_k series[k] * (a - a0)^k`` by Horner on the nilpotent part."""
    h = Jet(a.dim, a.order, a.coeffs.copy())
    h.coeffs[0] = 0.0
    out = Jet.constant(a.dim, a.order, series[a.order] if a.order < len(series) else 0.0)
    for k in range(a.order - 1, -1, -1):
        out = out * h
        out.coeffs[0] += series[k]
    return out


def _recip_series(q: Sequence[float], d: int) -> list:
    # power series of 1/q(s) to degree d
    r = [0.0] * (d + 1)
    r[0] = 1.0 / q[0]
    for k in range(1, d + 1):
        acc = sum(q[j] * r[k - j] for j in range(1, min(k, len(q) - 1) + 1))
        r[k] = -acc / q[0]
    return r


def reciprocal(a: Jet) -> Jet:
    a0 = a.value
    if a0 == 0.0:
        raise ZeroDivisionError("jet division by a jet with zero constant term")
    return compose([(-1.0) ** k / a0 ** (k + 1) for k in range(a.order + 1)], a)


def sqrt(a: Jet) -> Jet:
    a0 = a.value
    if a0 <= 0.0:
        raise ValueError(f"sqrt needs a positive constant term, got {a0}")
    return compose([_binom(0.5, k) * a0 ** (0.5 - k) for k in range(a.order + 1)], a)


def log(a: Jet) -> Jet:
    a0 = a.value
    if a0 <= 0.0:
        raise ValueError(f"log needs a positive constant term, got {a0}")
    series = [math.log(a0)] + [(-1.0) ** (k + 1) / (k * a0 ** k) for k in range(1, a.order + 1)]
    return compose(series, a)


def exp(a: Jet) -> Jet:
    e = math.exp(a.value)
    return compose([e / math.factorial(k) for k in range(a.order + 1)], a)


def atan(a: Jet) -> Jet:
    a0 = a.value
    d = a.order
    # d/ds atan(a0 + s) = 1 / (1 + a0^2 + 2 a0 s + s^2)
    dseries = _recip_series([1.0 + a0 * a0, 2.0 * a0, 1.0], max(d - 1, 0))
    series = [math.atan(a0)] + [dseries[k - 1] / k for k in range(1, d + 1)]
    return compose(series, a)


def powi(a: Jet, k: int) -> Jet:
    if int(k) != k:
        raise ValueError("powi takes an integer exponent")
    k = int(k)
    if k < 0:
        return powi(reciprocal(a), -k)
    out = Jet.constant(a.dim, a.order, 1.0)
    base = a
    while k:
        if k & 1:
            out = out * base
        base = base * base
        k >>= 1
    return out


def _binom(r: float, k: int) -> float:
    out = 1.0
    for j in range(k):
        out *= (r - j) / (j + 1)
    return out


def jet_arith(a: Jet, b, op: str) -> Jet:
    """Dispatch ``op`` in {add, sub, mul, div, sqrt, log, atan, exp, powi}.

    Unary primitives ignore ``b`` except ``powi`` where it is the exponent.
    """
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "powi":
        return powi(a, b)
    unary = {"sqrt": sqrt, "log": log, "atan": atan, "exp": exp}
    if op not in unary:
        raise ValueError(f"unknown jet op {op!r}")
    return unary[op](a)


# ---------------------------------------------------------------------------
# objectives


@dataclass(frozen=True)
class FunctionOracle:
    """A smooth objective given by a jet-valued evaluator.

    ``jet_fn`` receives the list of coordinate jets and returns the jet of
    ``f``; any composition of jet arithmetic works.  ``lipschitz`` is an
    optional upper bound on the Lipschitz constant of the highest derivative
    used by the globally convergent driver, keyed by order.
    """

    name: str
    dim: int
    jet_fn: Callable
    minimizer: Optional[tuple] = None
    lipschitz: dict = field(default_factory=dict)
    polynomial: Optional[Polynomial] = None

    def jet(self, xbar, order: int) -> Jet:
        xbar = np.asarray(xbar, dtype=float).reshape(-1)
        if xbar.size != self.dim:
            raise ValueError(f"{self.name} expects a point of length {self.dim}")
        if self.polynomial is not None:
            p = self.polynomial.translate(xbar).truncate(order)
            basis = monomial_basis(self.dim, order)
            return Jet(self.dim, order, p.coefficient_vector(basis))
        xs = [Jet.variable(self.dim, order, i, xbar[i]) for i in range(self.dim)]
        out = self.jet_fn(xs)
        if not isinstance(out, Jet):
            out = Jet.constant(self.dim, order, float(out))
        return out

    def value(self, x) -> float:
        return self.jet(x, 0).value

    def grad(self, x) -> np.ndarray:
        return self.jet(x, 1).coeffs[1:1 + self.dim].copy()

    def hess(self, x) -> np.ndarray:
        j = self.jet(x, 2)
        return _hessian_from_coeffs(self.dim, j.coeffs)

    def value_grad_hess(self, x):
        j = self.jet(x, 2)
        return j.value, j.coeffs[1:1 + self.dim].copy(), _hessian_from_coeffs(self.dim, j.coeffs)

    def derivatives_1d(self, x: float, order: int) -> np.ndarray:
        """``[f, f', ..., f^(order)]`` for a univariate oracle."""
        if self.dim != 1:
            raise ValueError("derivatives_1d needs a univariate oracle")
        c = self.jet([x], order).coeffs
        return np.array([c[k] * math.factorial(k) for k in range(order + 1)])

    def with_lipschitz(self, order: int, bound: float) -> "FunctionOracle":
        lip = dict(self.lipschitz)
        lip[order] = float(bound)
        return FunctionOracle(self.name, self.dim, self.jet_fn, self.minimizer, lip,
                              self.polynomial)

    @classmethod
    def from_polynomial(cls, p: Polynomial, name: str = "poly",
                        minimizer=None) -> "FunctionOracle":
        return cls(name, p.dim, lambda xs: None, minimizer=minimizer, polynomial=p)


def _hessian_from_coeffs(n: int, coeffs: np.ndarray) -> np.ndarray:
    basis = monomial_basis(n, 2)
    H = np.zeros((n, n))
    for idx in range(1 + n, len(basis)):
        alpha = basis[idx]
        nz = [i for i, e in enumerate(alpha) if e]
        if len(nz) == 1:
            i = nz[0]
            H[i, i] = 2.0 * coeffs[idx]
        else:
            i, j = nz
            H[i, j] = H[j, i] = coeffs[idx]
    return H


def taylor_expand(f: FunctionOracle, xbar, d: int, centered: bool = False) -> Polynomial:
    """Order-``d`` Taylor polynomial of ``f`` at ``xbar``.

    By default the result is in the original coordinates.  With
    ``centered=True`` it is returned in the displacement ``x - xbar``,
    which avoids a round trip of binomial re-expansion.
    """
    if d < 0:
        raise ValueError("order must be nonnegative")
    local = f.jet(xbar, d).to_polynomial()
    if centered:
        return local
    return local.translate([-v for v in np.asarray(xbar, dtype=float).reshape(-1)])


def _sqrt1(xs):
    x = xs[0]
    return sqrt(x * x + 1.0) - 1.0


def _atan1(xs):
    x = xs[0]
    return 2.0 * x * atan(x) - log(x * x + 1.0) + 0.1 * (x * x)


def beale_polynomial() -> Polynomial:
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    return ((1.5 - x1 + x1 * x2) ** 2
            + (2.25 - x1 + x1 * x2 ** 2) ** 2
            + (2.625 - x1 + x1 * x2 ** 3) ** 2)


SQRT1 = FunctionOracle("sqrt1", 1, _sqrt1, minimizer=(0.0,))
ATAN1 = FunctionOracle("atan1", 1, _atan1, minimizer=(0.0,))
BEALE = FunctionOracle("beale", 2, lambda xs: None, minimizer=(3.0, 0.5),
                       polynomial=beale_polynomial())

BUILTINS = {"sqrt1": SQRT1, "atan1": ATAN1, "beale": BEALE}


def get_builtin(name: str) -> FunctionOracle:
    try:
        return BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown function {name!r}; built-ins are {sorted(BUILTINS)}") from None


# ---------------------------------------------------------------------------
# eigenvalues


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm is at most ``tol`` times
    ``max(1, ||A||_F)``.  Returns ascending eigenvalues and eigenvectors.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = max(1.0, np.linalg.norm(A))
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                A[p, q] = A[q, p] = 0.0
                V = V @ J
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def min_eig(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.shape == (1, 1):
        return float(A[0, 0])
    return float(jacobi_eigh(A)[0][0])


def min_eig_hessian(f: FunctionOracle, x) -> float:
    """Smallest eigenvalue of the Hessian of ``f`` at ``x``."""
    return min_eig(f.hess(x))


def operator_norm(A) -> float:
    w = jacobi_eigh(A)[0]
    return float(max(abs(w[0]), abs(w[-1])))


# ---------------------------------------------------------------------------
# remainder bounds


@dataclass
class RemainderReport:
    ok: bool
    min_slack: float
    worst_grad_ratio: float
    worst_hess_ratio: float
    rows: list


def remainder_check(f: FunctionOracle, xbar, d: int, samples, L: float,
                    rtol: float = 1e-9) -> RemainderReport:
    """Check the gradient and Hessian Taylor-remainder bounds at ``samples``.

    With ``L`` a Lipschitz bound for the order-``d`` derivative on the hull of
    ``xbar`` and the samples, ``|grad R(x)| <= L/d! |x-xbar|^d`` and
    ``|hess R(x)| <= L/(d-1)! |x-xbar|^(d-1)``.  Ratios are actual/bound.
    """
    if not np.isfinite(L) or L < 0:
        raise ValueError(f"invalid Lipschitz bound {L!r}")
    xbar = np.asarray(xbar, dtype=float).reshape(-1)
    T = taylor_expand(f, xbar, d, centered=True)
    grads = T.gradient()
    hess = T.hessian()
    rows = []
    min_slack = math.inf
    worst_g = worst_h = 0.0
    ok = True
    for x in samples:
        x = np.asarray(x, dtype=float).reshape(-1)
        s = x - xbar
        r = float(np.linalg.norm(s))
        _, g, H = f.value_grad_hess(x)
        gR = g - np.array([gi.eval(s) for gi in grads])
        HR = H - hess.eval(s)
        g_norm = float(np.linalg.norm(gR))
        h_norm = operator_norm(HR) if HR.size > 1 else abs(float(HR[0, 0]))
        g_bound = L / math.factorial(d) * r ** d
        h_bound = L / math.factorial(d - 1) * r ** (d - 1)
        fuzz_g = rtol * max(1.0, float(np.linalg.norm(g)))
        fuzz_h = rtol * max(1.0, float(np.abs(H).max()))
        slack = min(g_bound - g_norm + fuzz_g, h_bound - h_norm + fuzz_h)
        ok &= slack >= 0
        min_slack = min(min_slack, slack)
        if g_bound > 0:
            worst_g = max(worst_g, g_norm / g_bound)
        if h_bound > 0:
            worst_h = max(worst_h, h_norm / h_bound)
        rows.append((x.tolist(), g_norm, g_bound, h_norm, h_bound))
    return RemainderReport(bool(ok), float(min_slack), worst_g, worst_h, rows)


def lipschitz_bound_on_grid(f: FunctionOracle, order: int, lo: float, hi: float,
                            points: int = 20001, safety: float = 1.0) -> float:
    """Grid estimate of ``max |f^(order+1)|`` over ``[lo, hi]`` for univariate ``f``.

    That maximum is the Lipschitz constant of the order-``order`` derivative.
    """
    grid = np.linspace(lo, hi, points)
    vals = [abs(f.derivatives_1d(x, order + 1)[-1]) for x in grid]
    return safety * float(max(vals))
