"""Drag polynomial, flux inversion, conductivity and potential tests.

The potential is checked against a brute-force trapezoid oracle computed
here with 10^6 uniform panels, independently of the adaptive quadrature
under test.
"""

import numpy as np
import pytest

from forchflow.constitutive import CouplingLaw, ForchheimerPolynomial
from forchflow.errors import NumericError

LINEAR = ForchheimerPolynomial((1.0,), (0.0,))          # g = 1
AFFINE = ForchheimerPolynomial((1.0, 1.0), (0.0, 1.0))  # g = 1 + s
CUBIC = ForchheimerPolynomial((1.0, 2.0, 1.0), (0.0, 1.5, 3.0))


def brute_force_potential(poly, xi, panels=10**6):
    r = np.linspace(0.0, xi, panels + 1)
    return float(np.trapezoid(2.0 * r * poly.conductivity(r), r))


def test_drag_worked_example():
    # g(s) = 1 + 2 s^1.5 evaluated at s = 4: 1 + 2*8 = 17
    poly = ForchheimerPolynomial((1.0, 2.0), (0.0, 1.5))
    assert poly.drag(4.0) == pytest.approx(17.0, rel=0, abs=0)


def test_drag_vectorized():
    s = np.array([0.0, 1.0, 2.0])
    np.testing.assert_allclose(AFFINE.drag(s), [1.0, 2.0, 3.0])


def test_validation_rejects_bad_polynomials():
    with pytest.raises(ValueError):
        ForchheimerPolynomial((0.0,), (0.0,))       # a0 must be positive
    with pytest.raises(ValueError):
        ForchheimerPolynomial((1.0, -1.0), (0.0, 1.0))
    with pytest.raises(ValueError):
        ForchheimerPolynomial((1.0, 1.0), (0.0, 0.0))  # not increasing
    with pytest.raises(ValueError):
        ForchheimerPolynomial((1.0,), (0.5,))       # first exponent != 0
    with pytest.raises(ValueError):
        ForchheimerPolynomial((1.0, 1.0), (0.0,))   # length mismatch


def test_inverse_flux_closed_forms():
    # g = 1: G(s) = s, so the inverse is the identity.
    xi = np.array([0.0, 1.0, 7.0, 1e6])
    np.testing.assert_allclose(LINEAR.inverse_flux(xi), xi, rtol=1e-12)
    # g = 1 + s: G(s) = s + s^2, inverse by the (cancellation-free form
    # of the) quadratic formula.
    xi = np.logspace(-8, 8, 50)
    expected = 2.0 * xi / (1.0 + np.sqrt(1.0 + 4.0 * xi))
    np.testing.assert_allclose(AFFINE.inverse_flux(xi), expected, rtol=1e-10)


def test_inverse_flux_round_trip():
    for poly in (LINEAR, AFFINE, CUBIC):
        xi = poly.sample_points(1e8, 300)
        s = poly.inverse_flux(xi)
        np.testing.assert_allclose(poly.flux(s), xi, rtol=1e-10, atol=1e-12)


def test_conductivity_values():
    assert LINEAR.conductivity(0.0) == pytest.approx(1.0)
    assert LINEAR.conductivity(5.0) == pytest.approx(1.0)
    # g = 1 + s at xi = 2: s = 1, K = 1/g(1) = 1/2
    assert AFFINE.conductivity(2.0) == pytest.approx(0.5, rel=1e-12)
    assert AFFINE.conductivity(0.0) == pytest.approx(1.0)


def test_conductivity_nonincreasing_and_bounded():
    for poly in (LINEAR, AFFINE, CUBIC):
        xi = poly.sample_points(1e8, 1000)
        k1 = poly.conductivity(xi)
        assert np.all(np.diff(k1) <= 1e-14)
        assert np.all(k1 > 0.0)
        assert np.all(k1 <= 1.0 / poly.coefficients[0] + 1e-14)


def test_conductivity_slope_matches_finite_difference():
    xi = np.array([0.5, 1.0, 3.0, 10.0])
    h = 1e-6
    fd = (AFFINE.conductivity(xi + h) - AFFINE.conductivity(xi - h)) / (2 * h)
    np.testing.assert_allclose(AFFINE.conductivity_slope(xi), fd, rtol=1e-6)


def test_potential_against_brute_force_oracle():
    for poly in (AFFINE, CUBIC):
        for xi in (0.5, 2.0, 10.0):
            oracle = brute_force_potential(poly, xi)
            assert poly.potential(xi) == pytest.approx(oracle, rel=1e-9)


def test_potential_linear_case_exact():
    # g = 1: H(xi) = xi^2 exactly.
    for xi in (0.0, 1.0, 3.0, 100.0):
        assert LINEAR.potential(xi) == pytest.approx(xi**2, rel=1e-12)


def test_potential_batch_matches_scalar():
    xi = np.array([0.0, 0.1, 1.0, 4.0, 50.0, 1e4])
    batch = CUBIC.potential_batch(xi)
    scalar = np.array([CUBIC.potential(x) for x in xi])
    np.testing.assert_allclose(batch, scalar, rtol=1e-8, atol=1e-12)


def test_potential_sandwich():
    for poly in (LINEAR, AFFINE, CUBIC):
        xi = poly.sample_points(1e8, 500)
        h = poly.potential_batch(xi)
        low = poly.conductivity(xi) * xi**2
        scale = np.maximum(low, 1e-300)
        assert np.min((h - low) / scale) >= -1e-8
        assert np.max((h - 2.0 * low) / scale) <= 1e-8


def test_concavity_condition():
    # g(s) >= theta * s * g'(s) with theta = 1/max(top_exponent, 1)
    for poly in (LINEAR, AFFINE, CUBIC):
        s = np.logspace(-6, 6, 500)
        slack = poly.drag(s) - poly.concavity_ratio * s * poly.drag_slope(s)
        assert float(slack.min()) >= -1e-12


def test_envelope_exponent_values():
    assert LINEAR.envelope_exponent == pytest.approx(0.0)
    assert AFFINE.envelope_exponent == pytest.approx(0.5)   # 1/(1+1)
    assert CUBIC.envelope_exponent == pytest.approx(0.75)   # 3/(3+1)
    poly = ForchheimerPolynomial((1.0, 2.0), (0.0, 1.5))
    assert poly.envelope_exponent == pytest.approx(1.5 / 2.5)


def test_envelope_bounds_are_bounds():
    for poly in (AFFINE, CUBIC):
        a = poly.envelope_exponent
        d1, d2 = poly.estimate_envelope_bounds(1e8, 400)
        d3 = poly.estimate_growth_floor(1e8, 400)
        # Check on a denser, shifted sample than the fit used; the
        # constants are sampled estimates, so allow a percent of slack
        # for minima that fall between the fit's sample points.
        xi = np.concatenate(([0.0], np.logspace(-5.7, 7.7, 2000)))
        scaled = poly.conductivity(xi) * (1.0 + xi) ** a
        assert np.all(scaled >= d1 * (1.0 - 1e-2))
        assert np.all(scaled <= d2 * (1.0 + 1e-2))
        kxx = poly.conductivity(xi) * xi**2
        assert np.all(kxx >= d3 * (1.0 - 1e-2) * (xi ** (2.0 - a) - 1.0) - 1e-9)
        assert d1 > 0 and d2 >= d1 and d3 > 0


def test_inverse_flux_rejects_negative():
    with pytest.raises((ValueError, NumericError)):
        AFFINE.inverse_flux(-1.0)


def test_coupling_law_values():
    b = CouplingLaw(2.0, 0.5)
    assert b(1.0) == pytest.approx(2.0)
    assert b(0.0) == 0.0
    assert b(-9.0) == pytest.approx(-6.0)
    z = np.linspace(-2, 2, 11)
    np.testing.assert_allclose(b(-z), -np.asarray(b(z)), atol=1e-15)


def test_coupling_law_bound_and_validation():
    b = CouplingLaw(1.5, 0.7)
    z = np.linspace(-5, 5, 101)
    assert np.all(np.abs(b(z)) <= 1.5 * np.abs(z) ** 0.7 + 1e-15)
    assert CouplingLaw(0.0, 0.5).is_zero
    with pytest.raises(ValueError):
        CouplingLaw(-1.0, 0.5)
    with pytest.raises(ValueError):
        CouplingLaw(1.0, 0.0)
    with pytest.raises(ValueError):
        CouplingLaw(1.0, 1.0)
