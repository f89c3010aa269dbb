from fractions import Fraction

import numpy as np
import pytest

from hhflow.exppoly import (
    ExpPoly, NearResonanceWarning, exp_poly_integrate, integral_to_infinity, integrate_terms, limit_of_terms,
)

from oracles import rk_linear_decay

ELLS = np.linspace(0.0, 12.0, 61)


@pytest.mark.parametrize("alpha, eps", [
    (ExpPoly.exponential(1.5, Fraction(1, 2)), Fraction(49, 100)),
    (ExpPoly.exponential(1.0, Fraction(49, 100)), Fraction(49, 100)),          # resonant: gains a power of l
    (ExpPoly([(2.0, 2, Fraction(3, 10)), (-1.0, 1, Fraction(109, 100))]), Fraction(361, 100)),
    (ExpPoly([(0.7, 0, 0), (1.0, 3, Fraction(1))]), Fraction(1)),
    (ExpPoly.constant(2.0), 0),
])
def test_integration_matches_runge_kutta(alpha, eps):
    exact = exp_poly_integrate(alpha, eps)
    ref = rk_linear_decay(alpha, float(eps), ELLS)
    assert np.max(np.abs(exact(ELLS) - ref)) < 1e-9
    # the solution satisfies d(0) = 0
    assert exact(0.0) == pytest.approx(0.0, abs=1e-14)


def test_resonant_term_gains_power():
    d = exp_poly_integrate(ExpPoly.exponential(3.0, Fraction(1, 4), p=1), Fraction(1, 4))
    assert d == ExpPoly.exponential(1.5, Fraction(1, 4), p=2)


def test_constant_source_zero_rate_grows_linearly():
    d = exp_poly_integrate(ExpPoly.constant(2.0), 0)
    assert d == ExpPoly([(2.0, 1, 0)])
    assert not d.has_limit()
    with pytest.raises(ArithmeticError):
        d.limit()


def test_limit_and_integral():
    f = ExpPoly([(2.0, 0, 0), (1.0, 1, Fraction(1, 2)), (3.0, 0, Fraction(2))])
    assert f.has_limit() and f.limit() == 2.0
    g = ExpPoly([(1.0, 1, Fraction(1, 2)), (3.0, 0, Fraction(2))])
    # int l e^{-l/2} = 4, int 3 e^{-2l} = 3/2
    assert g.integral_to_infinity() == pytest.approx(5.5)
    with pytest.raises(ArithmeticError):
        f.integral_to_infinity()


def test_algebra_of_exp_polys():
    f = ExpPoly.exponential(2.0, Fraction(1, 3))
    g = ExpPoly([(1.0, 1, Fraction(2, 3)), (-1.0, 0, 0)])
    ells = np.linspace(0, 5, 11)
    assert np.allclose((f * g)(ells), f(ells) * g(ells))
    assert np.allclose((f + g)(ells), f(ells) + g(ells))
    assert (f - f).is_zero() and f - f == 0
    assert (f * g).rates() == {Fraction(1, 3), Fraction(1)}


def test_invalid_terms_rejected():
    with pytest.raises(ValueError):
        ExpPoly([(1.0, -1, 0)])
    with pytest.raises(ValueError):
        exp_poly_integrate(ExpPoly.constant(1.0), -1)


def test_near_resonance_warns():
    with pytest.warns(NearResonanceWarning):
        integrate_terms({(0, 1_000_000_001): 1.0}, 1_000_000_000, 1e-9 / 1.0)


def test_integer_kernels():
    out = integrate_terms({(0, 2): 1.0}, 3, 0.5)
    # d = (e^{-l} - e^{-1.5 l}) / 0.5
    assert out[(0, 2)] == pytest.approx(2.0) and out[(0, 3)] == pytest.approx(-2.0)
    assert limit_of_terms(out) == 0.0
    assert integral_to_infinity(out, 0.5) == pytest.approx(2.0 - 2.0 / 1.5)
