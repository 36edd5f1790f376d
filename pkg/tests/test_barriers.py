"""Temporal Mittag-Leffler barrier and the 1-d spatial barrier."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from fracreg.core import DomainError, FracParam, gamma
from fracreg.grid import ThinGrid
from fracreg.monitor.barriers import barrier_eta_audit, barrier_h, barrier_h_audit, solve_barrier_eta

S_SWEEP = (0.5, 0.7, 0.9, 0.95)


def test_barrier_h_half_closed_form():
    # E_(1/2)(-x) = exp(x^2) erfc(x)
    eps = 0.3
    t = np.array([-0.5, 0.0, 0.7, 3.0])
    x = np.sqrt(t + 1) / eps
    assert np.allclose(barrier_h(0.5, eps, t), special.erfcx(x), rtol=1e-10)


def test_barrier_h_s_one_is_exponential():
    t = np.linspace(-0.9, 2.0, 7)
    assert np.allclose(barrier_h(1.0, 0.5, t), np.exp(-(t + 1) / 0.25), rtol=1e-10)


def test_barrier_h_domain():
    with pytest.raises(DomainError):
        barrier_h(0.5, 0.1, -1.0)


@pytest.mark.parametrize("s", S_SWEEP)
def test_barrier_h_audit_within_gamma_cap(s):
    rep = barrier_h_audit(FracParam(s, eps=0.1), np.linspace(-0.98, 9.9, 60))
    assert rep.passed
    assert rep.rhs == pytest.approx(gamma(1 + s))
    assert rep.metadata["max_increase"] <= 0.0
    assert 0 < rep.lhs < gamma(1 + s)


def test_barrier_h_audit_sample_range():
    with pytest.raises(DomainError):
        barrier_h_audit(FracParam(0.5), [-0.995, 0.0])
    with pytest.raises(DomainError):
        barrier_h_audit(FracParam(0.5), [])


@given(s=st.floats(0.3, 0.99), x=st.floats(0.01, 1e3))
@settings(max_examples=40, deadline=None)
def test_mittag_leffler_uniform_bound(s, x):
    # x E_s(-x) <= x / (1 + x / Gamma(1 + s)) < Gamma(1 + s)
    eps = 1.0
    t = x ** (1 / s) - 1
    h = float(barrier_h(s, eps, t))
    assert x * h <= x / (1 + x / math.gamma(1 + s)) * (1 + 1e-8) + 1e-12


@pytest.mark.parametrize("s", S_SWEEP)
def test_eta_even_bounded_positive(s):
    x, eta = solve_barrier_eta(FracParam(s, eps=0.1), ThinGrid(1, 200, 4.0))
    assert np.array_equal(eta, eta[::-1])
    assert np.all(eta > 0) and np.all(eta <= 1 + 1e-12)
    assert np.all(eta[np.abs(x) >= 1] == 1.0)
    # decays monotonically toward the centre
    half = eta[x >= 0]
    assert np.all(np.diff(half) >= -1e-12)


@pytest.mark.parametrize("s,expected", [(0.5, 0.683), (0.7, 0.566), (0.9, 0.474), (0.95, 0.505)])
def test_eta_constant_converges(s, expected):
    p = FracParam(s, eps=0.1)
    C = [barrier_eta_audit(p, ThinGrid(1, n, 4.0)).metadata["C_measured"] for n in (100, 200, 400)]
    d1, d2 = abs(C[0] - C[1]), abs(C[1] - C[2])
    assert d2 < d1
    assert d1 / d2 > 1.5
    assert C[2] == pytest.approx(expected, rel=0.01)
    assert barrier_eta_audit(p, ThinGrid(1, 200, 4.0)).passed


def test_eta_trivial_for_huge_eps():
    _, eta = solve_barrier_eta(FracParam(0.7, eps=1e6), ThinGrid(1, 200, 4.0))
    assert eta.min() > 1 - 1e-6


def test_eta_grid_check():
    with pytest.raises(DomainError):
        solve_barrier_eta(FracParam(0.5), ThinGrid(1, 64, 2.0))
    with pytest.raises(DomainError):
        solve_barrier_eta(FracParam(0.5), ThinGrid(2, 16, 4.0))
