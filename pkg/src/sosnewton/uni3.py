"""Closed-form univariate Newton maps and basin radii.

For a univariate ``f`` with ``f'' > 0`` the order-three surrogate step has
an explicit solution, which makes it a cheap independent oracle for the SDP
pipeline.  ``basin_radius`` bisects on "the iteration from ``x0`` enters a
``tol``-ball around the minimizer within ``iters`` steps".
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .conicsolve import SolverOptions
from .hon import step_order_d
from .jets import FunctionOracle

FLAT_THIRD = 1e-12
DIVERGENCE = 1e8
BISECTION_STEPS = 50


@dataclass(frozen=True)
class ScalarDerivs:
    """First three derivatives of a univariate function at one point."""

    f1: float
    f2: float
    f3: float

    def __post_init__(self):
        for name in ("f1", "f2", "f3"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")

    @classmethod
    def of(cls, f: FunctionOracle, x: float) -> "ScalarDerivs":
        d = f.derivatives_1d(float(x), 3)
        return cls(float(d[1]), float(d[2]), float(d[3]))


def real_cbrt(z: float) -> float:
    return math.copysign(abs(z) ** (1.0 / 3.0), z)


def n2_map(d: ScalarDerivs, x_k: float) -> float:
    """Classical Newton step ``x - f'/f''``."""
    if d.f2 == 0.0:
        raise ZeroDivisionError("f'' vanishes; the Newton step is undefined")
    return x_k - d.f1 / d.f2


def n3_map(d: ScalarDerivs, x_k: float) -> float:
    """Minimizer of the cubic Taylor expansion plus its optimal quartic term.

    The quartic weight making the expansion convex is ``f'''^2 / (48 f'')``
    and the surrogate minimizer is::

        x - 2 f''/f''' - cbrt((f' - 2 f''^2 / (3 f''')) / (f'''^2 / (12 f'')))

    With ``|f'''| <= 1e-12`` the surrogate degenerates to the quadratic
    model, so the classical step is returned.

    Near a minimizer the two large terms cancel, so the sum ``b + v`` of
    the shift ``b = 2f''/f'''`` and the cube root ``v`` is evaluated as
    ``(b^3 + v^3) / (b^2 - b v + v^2)`` with ``b^3 + v^3 = 12 f' f'' / f'''^2``.
    """
    if not d.f2 > 0:
        raise ValueError(f"need f'' > 0, got {d.f2}")
    if abs(d.f3) <= FLAT_THIRD:
        return n2_map(d, x_k)
    b = 2.0 * d.f2 / d.f3
    radicand = (d.f1 - (2.0 / 3.0) * d.f2 * d.f2 / d.f3) / (d.f3 * d.f3 / (12.0 * d.f2))
    v = real_cbrt(radicand)
    cubes = 12.0 * d.f1 * d.f2 / (d.f3 * d.f3)
    return x_k - cubes / (b * b - b * v + v * v)


def quartic_weight(d: ScalarDerivs) -> float:
    """Smallest quartic weight making the cubic expansion convex (``f'' > 0``)."""
    if not d.f2 > 0:
        raise ValueError(f"need f'' > 0, got {d.f2}")
    return d.f3 * d.f3 / (48.0 * d.f2)


def closed_form_map(f: FunctionOracle, order: int) -> Callable[[float], float]:
    """``x -> next iterate`` of the classical (2) or third-order (3) method."""
    if f.dim != 1:
        raise ValueError("closed-form maps need a univariate function")
    step = {2: n2_map, 3: n3_map}.get(order)
    if step is None:
        raise ValueError("closed forms exist for orders 2 and 3 only")
    return lambda x: step(ScalarDerivs.of(f, x), x)


def sdp_map(f: FunctionOracle, d: int, eps: float = 0.01,
            opts: Optional[SolverOptions] = None) -> Callable[[float], float]:
    """``x -> next iterate`` of the SDP-based order-``d`` method."""
    if f.dim != 1:
        raise ValueError("sdp_map needs a univariate function")
    if d == 2:
        return closed_form_map(f, 2)
    return lambda x: float(step_order_d(f, [x], d, eps, opts).next[0])


def converges(step: Callable[[float], float], x0: float, xstar: float,
              iters: int = 200, tol: float = 1e-9) -> bool:
    """Whether the iteration enters ``|x - xstar| <= tol`` within ``iters`` steps.

    Any exception raised by ``step`` (a failed solve, an undefined step)
    counts as not converging.
    """
    x = float(x0)
    for _ in range(iters + 1):
        if abs(x - xstar) <= tol:
            return True
        if not math.isfinite(x) or abs(x) > DIVERGENCE:
            return False
        try:
            x = step(x)
        except (ArithmeticError, ValueError, RuntimeError):
            return False
    return False


def basin_radius(step: Callable[[float], float], xstar: float, lo: float, hi: float,
                 iters: int = 200, tol: float = 1e-9,
                 steps: int = BISECTION_STEPS) -> float:
    """Bisect the convergence boundary between ``lo`` (inside) and ``hi`` (outside)."""
    if not converges(step, lo, xstar, iters, tol):
        raise ValueError(f"lower bracket {lo} does not converge")
    if converges(step, hi, xstar, iters, tol):
        raise ValueError(f"upper bracket {hi} converges")
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if converges(step, mid, xstar, iters, tol):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_bracket(step: Callable[[float], float], xstar: float, start: float = 0.25,
                 spacing: float = 0.25, limit: float = 50.0, iters: int = 200,
                 tol: float = 1e-9) -> tuple:
    """First sign change of the convergence predicate on a coarse grid above ``xstar``."""
    lo = None
    x = xstar + start
    while x <= xstar + limit:
        if converges(step, x, xstar, iters, tol):
            lo = x
        elif lo is not None:
            return lo, x
        x += spacing
    raise ValueError("no convergence boundary found on the scan grid")


def beta_closed_form() -> float:
    """Exact third-order radius for the square-root test function.

    ``sqrt((11 + 142/c + c)/3)`` with ``c`` the principal cube root of
    ``1691 + 9 i sqrt(47)``; the value is real up to rounding.
    """
    c = complex(1691.0, 9.0 * math.sqrt(47.0)) ** (1.0 / 3.0)
    beta = cmath.sqrt((11.0 + 142.0 / c + c) / 3.0)
    if abs(beta.imag) > 1e-9:
        raise ArithmeticError(f"closed form is not real: {beta}")
    return beta.real


@dataclass
class RadiusRow:
    d: int
    radius: float
    closed_form: Optional[float] = None
    bracket: tuple = ()


def radius_table(f: FunctionOracle, ds: Sequence[int], eps: float = 0.01,
                 iters: int = 200, tol: float = 1e-9,
                 opts: Optional[SolverOptions] = None) -> list:
    """Basin radius for each order in ``ds`` (``x0 > 0``; the test functions are even).

    ``d = 2`` uses the classical map; ``d = 3`` also reports the radius of the
    closed-form map.
    """
    xstar = float(f.minimizer[0]) if f.minimizer else 0.0
    rows = []
    for d in ds:
        step = sdp_map(f, d, eps, opts)
        br = find_bracket(step, xstar, iters=iters, tol=tol)
        r = basin_radius(step, xstar, *br, iters=iters, tol=tol) - xstar
        cf = None
        if d == 3:
            m3 = closed_form_map(f, 3)
            cf = basin_radius(m3, xstar, *find_bracket(m3, xstar, iters=iters, tol=tol),
                              iters=iters, tol=tol) - xstar
        rows.append(RadiusRow(int(d), float(r), cf, tuple(br)))
    return rows


def shrinks_everywhere(step: Callable[[float], float], xs) -> np.ndarray:
    """Mask of grid points where one step strictly reduces ``|x|``."""
    return np.array([abs(step(float(x))) < abs(float(x)) for x in xs])
