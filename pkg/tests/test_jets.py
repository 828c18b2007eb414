import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sosnewton import jets
from sosnewton.jets import (ATAN1, BEALE, SQRT1, FunctionOracle, Jet, get_builtin, jacobi_eigh,
                            jet_arith, lipschitz_bound_on_grid, min_eig, min_eig_hessian,
                            remainder_check, taylor_expand)
from sosnewton.polycore import Polynomial, monomial_basis


def sqrt1_derivs(x):
    """Closed-form f', f'', f''', f'''' of sqrt(x^2+1) - 1."""
    r = x * x + 1.0
    return (x / math.sqrt(r), r ** -1.5, -3.0 * x * r ** -2.5, (12.0 * x * x - 3.0) * r ** -3.5)


def atan1_derivs(x):
    r = 1.0 + x * x
    return (2.0 * math.atan(x) + 0.2 * x, 2.0 / r + 0.2, -4.0 * x / r ** 2,
            (12.0 * x * x - 4.0) / r ** 3)


# ---------------------------------------------------------------- jet arithmetic

def xjet(order, value=0.0):
    return Jet.variable(1, order, 0, value)


def test_sqrt_series():
    x = xjet(4)
    out = jet_arith(1.0 + x * x, None, "sqrt")
    assert np.allclose(out.coeffs, [1.0, 0.0, 0.5, 0.0, -0.125])


def test_square_of_variable():
    x = xjet(3)
    assert np.allclose(jet_arith(x, x, "mul").coeffs, [0, 0, 1, 0])


def test_atan_series():
    assert np.allclose(jet_arith(xjet(5), None, "atan").coeffs, [0, 1, 0, -1 / 3, 0, 1 / 5])


def test_domain_errors():
    with pytest.raises(ValueError):
        jet_arith(xjet(3) - 1.0, None, "sqrt")
    with pytest.raises(ValueError):
        jet_arith(xjet(3), None, "log")
    with pytest.raises(ZeroDivisionError):
        jet_arith(Jet.constant(1, 3, 1.0), xjet(3), "div")


def test_mismatched_jets():
    with pytest.raises(ValueError):
        Jet.variable(1, 3, 0, 0.0) + Jet.variable(1, 2, 0, 0.0)


def test_division_and_power_agree():
    x = xjet(6, 0.7)
    a = jet_arith(1.0 + x * x, None, "sqrt")
    assert np.allclose((1.0 / a).coeffs, jet_arith(a, -1, "powi").coeffs)
    assert np.allclose((a * a).coeffs, (1.0 + x * x).coeffs)


def test_log_exp_inverse():
    x = xjet(5, 0.3)
    back = jet_arith(jet_arith(x, None, "exp"), None, "log")
    assert np.allclose(back.coeffs, x.coeffs)


def test_multivariate_product():
    a = Jet.variable(2, 3, 0, 1.0)
    b = Jet.variable(2, 3, 1, 2.0)
    p = (a * b).to_polynomial()
    # (1 + s1)(2 + s2) = 2 + 2 s1 + s2 + s1 s2
    assert p == Polynomial(2, {(0, 0): 2.0, (1, 0): 2.0, (0, 1): 1.0, (1, 1): 1.0})


# ---------------------------------------------------------------- Taylor expansion

def test_sqrt1_at_zero_order3():
    assert taylor_expand(SQRT1, [0.0], 3).allclose(Polynomial(1, {(2,): 0.5}), atol=1e-15)


def test_sqrt1_at_1p5_order3():
    T = taylor_expand(SQRT1, [1.5], 3, centered=True)
    f1, f2, f3, _ = sqrt1_derivs(1.5)
    assert math.isclose(f1, 0.83205, abs_tol=5e-5)
    assert math.isclose(f2, 0.17067, abs_tol=5e-5)
    assert math.isclose(f3, -0.23630, abs_tol=5e-5)
    assert np.allclose([T.coef((k,)) for k in (1, 2, 3)], [f1, f2 / 2, f3 / 6], atol=1e-14)


def test_beale_full_order_is_exact():
    p = jets.beale_polynomial()
    T = taylor_expand(BEALE, [0.7, -1.3], 8)
    assert T.allclose(p, atol=1e-9)
    assert p.degree() == 8


@pytest.mark.parametrize("f,xbar", [(SQRT1, [0.8]), (ATAN1, [-1.9]), (BEALE, [1.0, 0.3])])
def test_taylor_matches_finite_differences(f, xbar):
    xbar = np.array(xbar)
    T = taylor_expand(f, xbar, 4)
    h = 1e-4
    n = f.dim
    g = np.zeros(n)
    H = np.zeros((n, n))
    E = np.eye(n) * h
    for i in range(n):
        g[i] = (f.value(xbar + E[i]) - f.value(xbar - E[i])) / (2 * h)
        for j in range(n):
            H[i, j] = (f.value(xbar + E[i] + E[j]) - f.value(xbar + E[i] - E[j])
                       - f.value(xbar - E[i] + E[j]) + f.value(xbar - E[i] - E[j])) / (4 * h * h)
    assert abs(T.eval(xbar) - f.value(xbar)) <= 1e-10
    assert np.allclose(T.eval_grad(xbar), g, atol=1e-6)
    assert np.allclose(T.eval_hess(xbar), H, atol=1e-5 * max(1.0, np.abs(H).max()))


@pytest.mark.parametrize("f", [SQRT1, ATAN1])
def test_univariate_derivatives_closed_form(f):
    ref = sqrt1_derivs if f is SQRT1 else atan1_derivs
    for x in np.linspace(-4, 4, 17):
        assert np.allclose(f.derivatives_1d(x, 4)[1:], ref(x), rtol=1e-12, atol=1e-13)


@given(st.floats(-5, 5), st.integers(2, 6))
def test_truncation_consistency(x, d):
    hi = taylor_expand(ATAN1, [x], d, centered=True).truncate(d - 1)
    lo = taylor_expand(ATAN1, [x], d - 1, centered=True)
    assert hi == lo


# ---------------------------------------------------------------- eigenvalues

def test_min_eig_cases():
    quad = FunctionOracle.from_polynomial(Polynomial(2, {(2, 0): 1.0, (0, 2): 1.0}))
    assert math.isclose(min_eig_hessian(quad, [0.3, -2.0]), 2.0)
    assert math.isclose(min_eig([[2.0, 1.0], [1.0, 2.0]]), 1.0)


def test_beale_hessian_at_minimizer_positive():
    H = BEALE.hess([3.0, 0.5])
    a, b, c = H[0, 0], H[0, 1], H[1, 1]
    brute = 0.5 * (a + c) - math.sqrt(0.25 * (a - c) ** 2 + b * b)
    assert brute > 0
    assert math.isclose(min_eig_hessian(BEALE, [3.0, 0.5]), brute, rel_tol=1e-10)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_two_by_two_matches_characteristic_root(a, b, c):
    lam = 0.5 * (a + c) - math.sqrt(0.25 * (a - c) ** 2 + b * b)
    assert abs(min_eig([[a, b], [b, c]]) - lam) <= 1e-10 * max(1.0, abs(a), abs(b), abs(c))


def test_jacobi_matches_lapack(rng):
    A = rng.normal(size=(6, 6))
    A = A + A.T
    w, V = jacobi_eigh(A)
    assert np.allclose(w, np.linalg.eigvalsh(A), atol=1e-10)
    assert np.allclose(V @ np.diag(w) @ V.T, A, atol=1e-9)


# ---------------------------------------------------------------- remainder bounds

def test_remainder_of_polynomial_vanishes():
    p = Polynomial(1, {(3,): 2.0, (1,): -1.0})
    f = FunctionOracle.from_polynomial(p)
    rep = remainder_check(f, [0.3], 3, [[-1.0], [0.5], [2.0]], 0.0)
    assert rep.ok and rep.worst_grad_ratio <= 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_remainder_of_monomial(d):
    f = FunctionOracle.from_polynomial(Polynomial(1, {(d + 1,): 1.0}))
    samples = [[v] for v in np.linspace(-1, 1, 21)]
    assert remainder_check(f, [0.2], d, samples, float(math.factorial(d + 1))).ok


@pytest.mark.parametrize("f,d", [(SQRT1, 3), (ATAN1, 3), (ATAN1, 2)])
def test_remainder_with_grid_bound(f, d):
    L = lipschitz_bound_on_grid(f, d, -0.5, 0.5, points=2001, safety=1.01)
    ref = sqrt1_derivs if f is SQRT1 else atan1_derivs
    if d == 3:
        assert L >= max(abs(ref(v)[3]) for v in np.linspace(-0.5, 0.5, 101))
    samples = [[v] for v in np.linspace(-0.5, 0.5, 11)]
    assert remainder_check(f, [0.0], d, samples, L).ok


def test_remainder_beale():
    # degree 8 polynomial: order-7 remainder has constant 8th derivative
    samples = [[1.0 + a, 0.5 + b] for a in (-0.3, 0.2) for b in (-0.2, 0.3)]
    assert remainder_check(BEALE, [1.0, 0.5], 8, samples, 0.0).ok


def test_invalid_lipschitz_flagged():
    with pytest.raises(ValueError):
        remainder_check(SQRT1, [0.0], 3, [[0.1]], -1.0)


def test_builtin_catalog():
    assert get_builtin("sqrt1").dim == 1 and get_builtin("atan1").dim == 1
    assert get_builtin("beale").minimizer == (3.0, 0.5)
    with pytest.raises(KeyError):
        get_builtin("rosenbrock")
