"""Dense-by-monomial multivariate polynomials with float coefficients.

Monomials are ordered graded-lexicographically: ascending total degree,
and within a degree ``x1`` before ``x2`` (so the degree-2 block in two
variables reads ``x1^2, x1*x2, x2^2``).
"""

from __future__ import annotations

import json
from functools import lru_cache
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

MultiIndex = tuple  # tuple[int, ...]


def grlex_key(alpha: Sequence[int]) -> tuple:
    return (sum(alpha), tuple(-a for a in alpha))


@lru_cache(maxsize=None)
def monomial_basis(n: int, k: int) -> tuple:
    """All exponent tuples in ``n`` variables of total degree at most ``k``.

    Returned in graded-lex order; index 0 is the constant monomial.
    """
    if n < 1 or k < 0:
        raise ValueError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    out = []
    for deg in range(k + 1):
        out.extend(_exact_degree(n, deg))
    return tuple(out)


def _exact_degree(n: int, deg: int) -> list:
    if n == 1:
        return [(deg,)]
    out = []
    for first in range(deg, -1, -1):
        for rest in _exact_degree(n - 1, deg - first):
            out.append((first,) + rest)
    return out


def basis_size(n: int, k: int) -> int:
    return comb(n + k, k)


class Polynomial:
    """Immutable polynomial in ``dim`` variables.

    ``terms`` maps exponent tuples to nonzero float coefficients.
    """

    __slots__ = ("dim", "_terms", "_arrays")

    def __init__(self, dim: int, terms: Mapping | Iterable = ()):
        if dim < 1:
            raise ValueError("dim must be positive")
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean = {}
        for alpha, c in items:
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim or any(a < 0 for a in alpha):
                raise ValueError(f"bad exponent {alpha} for dim {dim}")
            c = float(c)
            if alpha in clean:
                c += clean[alpha]
            clean[alpha] = c
        self.dim = dim
        self._terms = {a: c for a, c in clean.items() if c != 0.0}
        self._arrays = None

    @classmethod
    def _trusted(cls, dim: int, terms: dict) -> "Polynomial":
        """Skip validation; ``terms`` must map valid exponent tuples to floats."""
        out = object.__new__(cls)
        out.dim = dim
        out._terms = {a: float(c) for a, c in terms.items() if c != 0.0}
        out._arrays = None
        return out

    # construction helpers

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, c: float) -> "Polynomial":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def variable(cls, dim: int, i: int) -> "Polynomial":
        alpha = [0] * dim
        alpha[i] = 1
        return cls(dim, {tuple(alpha): 1.0})

    @classmethod
    def from_coefficients(cls, dim: int, basis: Sequence, coefs: Sequence[float]) -> "Polynomial":
        return cls(dim, zip(basis, coefs))

    # accessors

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def coef(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    def sorted_terms(self) -> list:
        return sorted(self._terms.items(), key=lambda kv: grlex_key(kv[0]))

    def degree(self) -> int:
        return max((sum(a) for a in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def max_abs_coef(self, skip_constant: bool = False) -> float:
        zero = (0,) * self.dim
        vals = [abs(c) for a, c in self._terms.items() if not (skip_constant and a == zero)]
        return max(vals, default=0.0)

    def coefficient_vector(self, basis: Sequence) -> np.ndarray:
        return np.array([self._terms.get(tuple(a), 0.0) for a in basis])

    def truncate(self, k: int) -> "Polynomial":
        """Drop every term of total degree above ``k``."""
        return Polynomial._trusted(self.dim, {a: c for a, c in self._terms.items() if sum(a) <= k})

    def homogeneous_part(self, k: int) -> "Polynomial":
        return Polynomial._trusted(self.dim, {a: c for a, c in self._terms.items() if sum(a) == k})

    # arithmetic

    def _check(self, other: "Polynomial"):
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self.dim, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for a, c in other._terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return Polynomial._trusted(self.dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._trusted(self.dim, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                key = tuple(x + y for x, y in zip(a, b))
                terms[key] = terms.get(key, 0.0) + ca * cb
        return Polynomial._trusted(self.dim, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0 or int(k) != k:
            raise ValueError("only nonnegative integer powers")
        out = Polynomial.constant(self.dim, 1.0)
        base = self
        k = int(k)
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def scale(self, s: float) -> "Polynomial":
        return Polynomial._trusted(self.dim, {a: s * c for a, c in self._terms.items()})

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dim == other.dim and self._terms == other._terms

    def __hash__(self):
        return hash((self.dim, frozenset(self._terms.items())))

    def allclose(self, other: "Polynomial", atol: float = 1e-12, rtol: float = 0.0) -> bool:
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        for a in keys:
            x, y = self.coef(a), other.coef(a)
            if abs(x - y) > atol + rtol * max(abs(x), abs(y)):
                return False
        return True

    # calculus

    def differentiate(self, var: int) -> "Polynomial":
        if not 0 <= var < self.dim:
            raise IndexError(f"variable {var} out of range for dim {self.dim}")
        terms = {}
        for a, c in self._terms.items():
            if a[var]:
                b = list(a)
                b[var] -= 1
                terms[tuple(b)] = c * a[var]
        return Polynomial._trusted(self.dim, terms)

    def gradient(self) -> list:
        return [self.differentiate(i) for i in range(self.dim)]

    def hessian(self) -> "PolyMatrix":
        grad = self.gradient()
        n = self.dim
        entries = [None] * (n * n)
        for i in range(n):
            for j in range(i, n):
                h = grad[i].differentiate(j)
                entries[i * n + j] = h
                entries[j * n + i] = h
        return PolyMatrix(n, n, entries)

    def translate(self, a: Sequence[float]) -> "Polynomial":
        """Return ``q`` with ``q(x) = p(x + a)``, by binomial expansion."""
        a = [float(v) for v in a]
        if len(a) != self.dim:
            raise ValueError("shift has wrong length")
        terms = self._terms
        for i, ai in enumerate(a):
            if ai == 0.0:
                continue
            new: dict = {}
            for alpha, c in terms.items():
                e = alpha[i]
                for k in range(e + 1):
                    beta = alpha[:i] + (k,) + alpha[i + 1:]
                    new[beta] = new.get(beta, 0.0) + c * comb(e, k) * ai ** (e - k)
            terms = new
        return Polynomial._trusted(self.dim, terms)

    def linear_change(self, B) -> "Polynomial":
        """Return ``q`` with ``q(z) = p(B z)`` for a square matrix ``B``."""
        B = np.asarray(B, dtype=float)
        n = self.dim
        if B.shape != (n, n):
            raise ValueError("B must be dim x dim")
        lin = [Polynomial(n, {tuple(1 if k == j else 0 for k in range(n)): B[i, j]
                              for j in range(n)}) for i in range(n)]
        powers = [[Polynomial.constant(n, 1.0)] for _ in range(n)]
        out = Polynomial(n)
        for alpha, c in self._terms.items():
            term = Polynomial.constant(n, c)
            for i, e in enumerate(alpha):
                while len(powers[i]) <= e:
                    powers[i].append(powers[i][-1] * lin[i])
                term = term * powers[i][e]
            out = out + term
        return out

    # evaluation

    def _exp_arrays(self):
        if self._arrays is None:
            if self._terms:
                exps = np.array(list(self._terms.keys()), dtype=int)
                coefs = np.array(list(self._terms.values()))
            else:
                exps = np.zeros((0, self.dim), dtype=int)
                coefs = np.zeros(0)
            self._arrays = (exps, coefs)
        return self._arrays

    def __call__(self, x) -> float:
        return self.eval(x)

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise ValueError("point has wrong length")
        exps, coefs = self._exp_arrays()
        if not coefs.size:
            return 0.0
        return float(coefs @ np.prod(x ** exps, axis=1))

    def eval_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        exps, coefs = self._exp_arrays()
        if not coefs.size:
            return np.zeros(X.shape[0])
        return np.prod(X[:, None, :] ** exps[None, :, :], axis=2) @ coefs

    def eval_grad(self, x) -> np.ndarray:
        return np.array([g.eval(x) for g in self.gradient()])

    def eval_hess(self, x) -> np.ndarray:
        return self.hessian().eval(x)

    # io

    def to_dict(self) -> dict:
        return {"dim": self.dim,
                "terms": [{"exp": list(a), "coef": c} for a, c in self.sorted_terms()]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Polynomial":
        return cls(int(data["dim"]), [(t["exp"], t["coef"]) for t in data["terms"]])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Polynomial":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        if not self._terms:
            return f"Polynomial(dim={self.dim}, 0)"
        parts = []
        for a, c in self.sorted_terms():
            mono = "*".join(f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}"
                            for i, e in enumerate(a) if e)
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return f"Polynomial(dim={self.dim}, {' '.join(parts)})"


class PolyMatrix:
    """Row-major matrix of polynomials sharing one dimension."""

    def __init__(self, rows: int, cols: int, entries: Sequence[Polynomial]):
        if len(entries) != rows * cols:
            raise ValueError("entry count does not match shape")
        dims = {e.dim for e in entries}
        if len(dims) > 1:
            raise ValueError("entries must share dim")
        self.rows, self.cols = rows, cols
        self.entries = tuple(entries)

    def __getitem__(self, ij) -> Polynomial:
        i, j = ij
        return self.entries[i * self.cols + j]

    def is_symmetric(self) -> bool:
        return self.rows == self.cols and all(
            self[i, j] == self[j, i] for i in range(self.rows) for j in range(i + 1, self.cols))

    def eval(self, x) -> np.ndarray:
        out = np.empty((self.rows, self.cols))
        for i in range(self.rows):
            for j in range(self.cols):
                out[i, j] = self[i, j].eval(x)
        if self.rows == self.cols:
            out = 0.5 * (out + out.T)
        return out


def even_norm_power(n: int, center: Sequence[float], m: int) -> Polynomial:
    """The polynomial ``(sum_i (x_i - c_i)^2)^(m/2)``."""
    if m < 2 or m % 2:
        raise ValueError(f"exponent must be even and >= 2, got {m}")
    sq = Polynomial(n, {tuple(2 if j == i else 0 for j in range(n)): 1.0 for i in range(n)})
    p = sq ** (m // 2)
    center = [float(c) for c in center]
    if any(center):
        p = p.translate([-c for c in center])
    return p


def substitution_matrix(n: int, k: int, B) -> np.ndarray:
    """Matrix ``L`` with ``phi(B z) = L phi(z)`` for ``phi = monomial_basis(n, k)``.

    Block lower triangular by degree (in fact block diagonal, since a
    linear substitution preserves homogeneous degree).
    """
    basis = monomial_basis(n, k)
    index = {a: i for i, a in enumerate(basis)}
    L = np.zeros((len(basis), len(basis)))
    for r, alpha in enumerate(basis):
        q = Polynomial(n, {alpha: 1.0}).linear_change(B)
        for beta, c in q.terms.items():
            L[r, index[beta]] = c
    return L
