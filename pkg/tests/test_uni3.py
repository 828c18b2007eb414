import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sosnewton.jets import ATAN1, SQRT1
from sosnewton.uni3 import (ScalarDerivs, basin_radius, beta_closed_form, closed_form_map,
                            converges, find_bracket, n2_map, n3_map, quartic_weight, real_cbrt,
                            sdp_map, shrinks_everywhere)


def n3_textbook(d, x):
    """Unrearranged closed form, used as an arithmetic oracle away from cancellation."""
    rad = (d.f1 - (2 / 3) * d.f2 ** 2 / d.f3) / (d.f3 ** 2 / (12 * d.f2))
    return x - 2 * d.f2 / d.f3 - real_cbrt(rad)


def sqrt1_derivs(x):
    r = x * x + 1.0
    return ScalarDerivs(x / math.sqrt(r), r ** -1.5, -3.0 * x * r ** -2.5)


def test_real_cbrt_sign():
    assert real_cbrt(-8.0) == -2.0 and real_cbrt(27.0) == 3.0 and real_cbrt(0.0) == 0.0


def test_n3_sqrt1_at_1p5():
    d = sqrt1_derivs(1.5)
    assert math.isclose(n3_map(d, 1.5), -0.2801, abs_tol=1e-4)
    assert math.isclose(n3_map(d, 1.5), n3_textbook(d, 1.5), rel_tol=1e-12)


def test_n3_flat_third_derivative_is_classical():
    d = ScalarDerivs(0.7, 2.0, 0.0)
    assert n3_map(d, 1.0) == n2_map(d, 1.0) == 1.0 - 0.35


def test_n3_zero_radicand():
    f2, f3 = 1.3, -0.4
    d = ScalarDerivs((2 / 3) * f2 * f2 / f3, f2, f3)
    assert math.isclose(n3_map(d, 0.5), 0.5 - 2 * f2 / f3, rel_tol=1e-12)


def test_n3_requires_positive_curvature():
    with pytest.raises(ValueError):
        n3_map(ScalarDerivs(1.0, 0.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        quartic_weight(ScalarDerivs(1.0, -1.0, 1.0))


@given(st.floats(0.01, 10), st.floats(-10, 10).filter(lambda v: abs(v) > 1e-6),
       st.floats(-5, 5))
def test_n3_fixed_point(f2, f3, x):
    assert abs(n3_map(ScalarDerivs(0.0, f2, f3), x) - x) <= 1e-9


@given(st.floats(-5, 5), st.floats(0.1, 5), st.floats(0.1, 5).map(lambda v: -v))
def test_n3_minimizes_the_quartic_model(f1, f2, f3):
    d = ScalarDerivs(f1, f2, f3)
    s = n3_map(d, 0.0)
    t = quartic_weight(d)
    grad = f1 + f2 * s + f3 * s * s / 2 + 4 * t * s ** 3
    assert abs(grad) <= 1e-8 * max(1.0, abs(f1), f2 * abs(s), abs(f3) * s * s)


def test_n2_cases():
    for x in (0.3, -1.2, 2.0):
        assert math.isclose(n2_map(sqrt1_derivs(x), x), -x ** 3, rel_tol=1e-12)
    assert math.isclose(n2_map(sqrt1_derivs(1.0), 1.0), -1.0)
    atan = closed_form_map(ATAN1, 2)
    assert abs(atan(13.494) + 13.494) <= 0.01
    with pytest.raises(ZeroDivisionError):
        n2_map(ScalarDerivs(1.0, 0.0, 0.0), 0.0)


def test_scalar_derivs_finite():
    with pytest.raises(ValueError):
        ScalarDerivs(float("nan"), 1.0, 1.0)
    got, ref = ScalarDerivs.of(SQRT1, 1.5), sqrt1_derivs(1.5)
    assert (got.f1, got.f2, got.f3) == pytest.approx((ref.f1, ref.f2, ref.f3), rel=1e-12)


# ---------------------------------------------------------------- basins

def test_classical_radius_sqrt1():
    r = basin_radius(closed_form_map(SQRT1, 2), 0.0, 0.5, 2.0)
    assert abs(r - 1.0) <= 1e-6


def test_third_order_radius_sqrt1():
    r = basin_radius(closed_form_map(SQRT1, 3), 0.0, 2.0, 4.0)
    assert abs(r - 3.407) <= 1e-3
    assert abs(r - beta_closed_form()) <= 1e-3


def test_classical_radius_atan1():
    r = basin_radius(closed_form_map(ATAN1, 2), 0.0, 1.0, 3.0)
    assert abs(r - 1.712) <= 1e-3


def test_beta_is_real():
    c = complex(1691.0, 9.0 * math.sqrt(47.0)) ** (1 / 3)
    beta = cmath.sqrt((11 + 142 / c + c) / 3)
    assert abs(beta.imag) <= 1e-9
    assert math.isclose(beta_closed_form(), beta.real)


def test_unbracketed_raises():
    m = closed_form_map(SQRT1, 2)
    with pytest.raises(ValueError):
        basin_radius(m, 0.0, 2.0, 3.0)
    with pytest.raises(ValueError):
        basin_radius(m, 0.0, 0.1, 0.5)


def test_find_bracket():
    lo, hi = find_bracket(closed_form_map(SQRT1, 2), 0.0)
    assert lo < 1.0 <= hi and hi - lo <= 0.25 + 1e-12


def test_converges_treats_errors_as_failure():
    def boom(x):
        raise ZeroDivisionError
    assert not converges(boom, 1.0, 0.0)
    assert converges(boom, 0.0, 0.0)


def test_third_order_shrinks_atan1():
    xs = np.linspace(0.1, 100.0, 1000)
    assert shrinks_everywhere(closed_form_map(ATAN1, 3), xs).all()
    assert not shrinks_everywhere(closed_form_map(ATAN1, 2), xs).all()


def test_sdp_map_matches_closed_form_sqrt1():
    cf = closed_form_map(SQRT1, 3)
    sdp = sdp_map(SQRT1, 3)
    for x in np.linspace(-3, 3, 9):
        assert abs(cf(x) - sdp(x)) <= 1e-6
    assert sdp_map(SQRT1, 2)(0.5) == -0.125


def test_closed_form_map_validation():
    from sosnewton.jets import BEALE
    with pytest.raises(ValueError):
        closed_form_map(BEALE, 3)
    with pytest.raises(ValueError):
        closed_form_map(SQRT1, 4)
