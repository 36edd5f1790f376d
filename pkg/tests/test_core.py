"""Scalar special functions, kernels and parameter objects."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fracreg.core import (
    DomainError,
    FracParam,
    GaussianCenter,
    abs_gamma_neg,
    c_ms,
    delta_s,
    gamma,
    gaussian_G,
    heat_kernel_H,
    mittag_leffler,
    space_kernel_K,
)

S_GRID = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99]


# Parameters -----------------------------------------------------------------

def test_fracparam_derives_weight_exponent():
    p = FracParam(0.75, eps=0.2)
    assert p.a == pytest.approx(-0.5)
    assert p.eps2s == pytest.approx(0.2 ** 1.5)
    assert p.with_eps(0.1).s == 0.75
    assert p.with_s(0.6).a == pytest.approx(-0.2)


@pytest.mark.parametrize("kw", [dict(s=1.0), dict(s=0.4), dict(s=0.6, s0=0.7),
                                dict(s=0.6, eps=0.0), dict(s=0.0)])
def test_fracparam_rejects_bad_values(kw):
    with pytest.raises(DomainError):
        FracParam(**kw)


def test_gaussian_center_requires_positive_time():
    with pytest.raises(DomainError):
        GaussianCenter((0.0,), 0.0)
    assert GaussianCenter(0.3, 1.0).m == 1


# Gamma and constants ----------------------------------------------------------

def test_gamma_values():
    assert gamma(1.0) == pytest.approx(1.0, abs=1e-15)
    assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma(0.25) == pytest.approx(3.6256099082, rel=1e-10)


@pytest.mark.parametrize("x", [0.01, 0.25, 0.5, 1.3, 2.7, 7.5])
def test_gamma_matches_arbitrary_precision(x):
    assert gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-13)


def test_gamma_domain():
    with pytest.raises(DomainError):
        gamma(0.0)
    with pytest.raises(DomainError):
        abs_gamma_neg(1.0)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9, 0.99])
def test_abs_gamma_neg(s):
    assert abs_gamma_neg(s) == pytest.approx(abs(float(mpmath.gamma(-s))), rel=1e-12)


def test_delta_s_values():
    assert delta_s(FracParam(0.5)) == pytest.approx(1.0, abs=1e-15)
    oracle = math.sqrt(2.0) * float(mpmath.gamma(0.75) / mpmath.gamma(0.25))
    assert delta_s(FracParam(0.75)) == pytest.approx(oracle, rel=1e-13)
    assert delta_s(FracParam(0.75)) == pytest.approx(0.4779, abs=1e-4)


def test_delta_s_decreases_to_zero():
    vals = [delta_s(FracParam(s)) for s in (0.9, 0.95, 0.99)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[2] < 0.02


@pytest.mark.parametrize("s", S_GRID)
def test_delta_s_reciprocal_identity(s):
    p = FracParam(s)
    assert delta_s(p) * 2 ** (1 - 2 * s) * gamma(1 - s) / gamma(s) == pytest.approx(1.0, abs=1e-12)


def test_c_ms_values():
    assert c_ms(FracParam(0.5), 1) == pytest.approx(1.0 / math.pi, rel=1e-14)
    expected = 0.5 * 2.0 * gamma(1.5) / (math.pi * gamma(0.5))
    assert c_ms(FracParam(0.5), 2) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(DomainError):
        c_ms(FracParam(0.5), 0)


@pytest.mark.parametrize("m", [1, 2])
def test_c_ms_vanishes_linearly_at_one(m):
    ratios = [c_ms(FracParam(s), m) / (1 - s) for s in (0.9, 0.95, 0.99)]
    assert max(ratios) < 10.0
    assert np.ptp(ratios) < 0.5 * max(ratios)


# Kernels ----------------------------------------------------------------------

def test_heat_kernel_at_origin():
    expected = (4 * math.pi) ** -0.5 / (2 * math.sqrt(math.pi))
    assert heat_kernel_H(FracParam(0.5), 1, 0.0, 1.0) == pytest.approx(expected, rel=1e-14)


def test_heat_kernel_decays_in_time():
    p = FracParam(0.7)
    vals = heat_kernel_H(p, 2, np.array([0.3, 0.4]), np.array([1.0, 10.0, 1e4]))
    assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-8
    with pytest.raises(DomainError):
        heat_kernel_H(p, 1, 0.5, 0.0)


@pytest.mark.parametrize("m", [1, 2])
@pytest.mark.parametrize("s", [0.5, 0.9])
@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_time_marginal_of_heat_kernel(m, s, r):
    p = FracParam(s)
    z = r if m == 1 else np.array([r / math.sqrt(2)] * 2)
    val, _ = integrate.quad(lambda t: heat_kernel_H(p, m, z, t), 0, np.inf, epsrel=1e-12, limit=200)
    assert val / space_kernel_K(p, m, z) == pytest.approx(1.0, abs=1e-4)


def test_space_kernel_values_and_scaling():
    p = FracParam(0.5)
    assert space_kernel_K(p, 1, 1.0) == pytest.approx(1.0 / math.pi, rel=1e-14)
    q = FracParam(0.8)
    z = np.array([0.3, -0.7])
    assert space_kernel_K(q, 2, 2 * z) == pytest.approx(2.0 ** (-2 - 1.6) * space_kernel_K(q, 2, z), rel=1e-13)
    assert space_kernel_K(q, 2, z) == c_ms(q, 2) * np.linalg.norm(z) ** (-3.6)
    with pytest.raises(DomainError):
        space_kernel_K(q, 1, 0.0)


@pytest.mark.parametrize("s", [0.5, 0.9])
def test_gaussian_thin_mass(s):
    p = FracParam(s)
    center = GaussianCenter((0.0,), 1.0)
    val, _ = integrate.quad(lambda x: gaussian_G(p, 1, center, np.array([x, 0.0]), 0.0),
                            -np.inf, np.inf, epsrel=1e-12)
    assert val == pytest.approx(1.0 / gamma(s), rel=1e-9)


def _weighted_mass(p, m, t):
    center = GaussianCenter((0.0,) * m, 1.0)
    lag = -t
    t = 1.0 + t
    # thin directions integrate in closed form to (4 pi lag)^(m/2)
    def fz(z):
        X = np.zeros(m + 1)
        X[m] = z
        return z ** p.a * gaussian_G(p, m, center, X, t) * (4 * math.pi * lag) ** (m / 2)
    val, _ = integrate.quad(fz, 0, np.inf, epsrel=1e-13, limit=200)
    return val


@pytest.mark.parametrize("s", [0.5, 0.7, 0.9, 0.95])
def test_weighted_gaussian_mass(s):
    p = FracParam(s)
    a, b = _weighted_mass(p, 1, -1.0), _weighted_mass(p, 1, -0.25)
    assert a == pytest.approx(b, abs=1e-6)
    assert a == pytest.approx(1.0 / delta_s(p), abs=1e-6)


def test_weighted_gaussian_mass_full_quadrature():
    p = FracParam(0.7)
    center = GaussianCenter((0.2,), 0.5)
    val, _ = integrate.dblquad(lambda z, x: z ** p.a * gaussian_G(p, 1, center, np.array([x, z]), -0.5),
                               -8, 8, 0, 8, epsabs=1e-10)
    assert val == pytest.approx(1.0 / delta_s(p), abs=1e-6)


def test_gaussian_translation():
    p = FracParam(0.6)
    X = np.array([[0.3, -0.2, 0.5], [1.0, 0.4, 0.1]])
    c = GaussianCenter((0.7, -0.1), 2.0)
    shifted = X.copy()
    shifted[:, :2] -= np.array([0.7, -0.1])
    origin = GaussianCenter((0.0, 0.0), 1.0)
    np.testing.assert_allclose(gaussian_G(p, 2, c, X, 1.5),
                               gaussian_G(p, 2, origin, shifted, 0.5), rtol=1e-14)
    with pytest.raises(DomainError):
        gaussian_G(p, 2, c, X, 2.0)


# Mittag-Leffler ---------------------------------------------------------------

def _ml_oracle(alpha, x):
    mpmath.mp.dps = 40
    val = mpmath.nsum(lambda k: mpmath.mpf(x) ** k / mpmath.gamma(alpha * k + 1), [0, mpmath.inf])
    mpmath.mp.dps = 15
    return float(val)


def test_mittag_leffler_closed_forms():
    assert mittag_leffler(0.3, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert mittag_leffler(1.0, -1.0) == pytest.approx(math.exp(-1), rel=1e-13)
    assert mittag_leffler(0.5, -1.0) == pytest.approx(math.e * math.erfc(1.0), abs=1e-8)


@pytest.mark.parametrize("x", [-0.5, -2.0, -4.0, -8.0])
def test_mittag_leffler_half_is_erfc(x):
    oracle = float(mpmath.exp(x * x) * mpmath.erfc(-x))
    assert mittag_leffler(0.5, x) == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
@pytest.mark.parametrize("x", [-0.9, -1.1, -3.0, -6.0])
def test_mittag_leffler_against_series(alpha, x):
    assert mittag_leffler(alpha, x) == pytest.approx(_ml_oracle(alpha, x), rel=1e-7, abs=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9])
def test_mittag_leffler_decreasing(alpha):
    x = np.linspace(-10, 0, 101)
    vals = np.array([mittag_leffler(alpha, v) for v in x])
    assert np.all(np.diff(vals) > 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 0.99), st.floats(0.5, 3.0))
def test_property_marginal_scaling(s, lam):
    p = FracParam(s)
    z = 0.7
    assert space_kernel_K(p, 1, lam * z) == pytest.approx(lam ** (-1 - 2 * s) * space_kernel_K(p, 1, z), rel=1e-12)
    # H is parabolically homogeneous of degree -m - 2 - 2s
    assert heat_kernel_H(p, 1, lam * z, lam ** 2) == pytest.approx(
        lam ** (-1 - 2 - 2 * s) * heat_kernel_H(p, 1, z, 1.0), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 0.99))
def test_property_delta_reciprocal(s):
    p = FracParam(s)
    assert delta_s(p) * 2 ** (1 - 2 * s) * gamma(1 - s) / gamma(s) == pytest.approx(1.0, abs=1e-12)
