"""Ginzburg-Landau boundary-reaction flow, energies and the Bochner audit."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracreg.core import DomainError, FracParam
from fracreg.flow import (
    BlowUpWarning,
    FlowConfig,
    bochner_audit,
    bochner_density,
    energy_F,
    initial_energy_E0,
    perturbative_datum,
    reaction,
    run_flow,
    step,
    winding_datum,
)
from fracreg.grid import ExtendedGrid, ThinGrid, coarsen, weighted_integral, full_gradient_sq

SWEEP = [0.5, 0.7, 0.9, 0.95]

def _grid(s, n=32, nz=16, m=1, L=1.0, Zmax=1.0):
    return ExtendedGrid(ThinGrid(m, n, L), nz, Zmax, s)

def test_config_validation():
    p = FracParam(0.7, eps=0.2)
    for kw in (dict(dt=0.0, T=1.0), dict(dt=0.1, T=0.05), dict(dt=p.eps2s * 1.1, T=1.0),
               dict(dt=0.01, T=1.0, theta=0.3), dict(dt=0.01, T=1.0, solver="lu"),
               dict(dt=0.01, T=1.0, stabilization=-1.0)):
        with pytest.raises(DomainError):
            FlowConfig(p, **kw)
    cfg = FlowConfig(p, 0.01, 0.1)
    assert cfg.steps == 10 and cfg.stabilization == pytest.approx(2 / p.eps2s)

def test_reaction_is_minus_potential_gradient():
    p = FracParam(0.6, eps=0.3)
    u = np.array([[0.3, -0.4], [1.2, 0.1]])
    h = 1e-6
    W = lambda v: (1 - np.sum(v * v, axis=-1)) ** 2 / (4 * p.eps2s)
    num = np.stack([(W(u + h * e) - W(u - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
    np.testing.assert_allclose(reaction(u, p), -num, rtol=1e-6)

@pytest.mark.parametrize("solver", ["direct", "cg"])
def test_unit_constant_is_fixed_point(solver):
    p = FracParam(0.7, eps=0.2)
    g = _grid(0.7, 16, 8, m=2)
    U = g.constant([0.6, 0.8])
    out = step(U, FlowConfig(p, p.eps2s / 2, p.eps2s, solver=solver))
    np.testing.assert_allclose(out.values, U.values, atol=1e-12)

@pytest.mark.parametrize("s", [0.5, 0.9])
def test_small_constant_grows_to_sphere(s):
    p = FracParam(s, eps=0.2)
    g = _grid(s, 16, 16)
    cfg = FlowConfig(p, p.eps2s / 4, 200 * p.eps2s)
    tr = run_flow(g.constant([1e-3, 0.0]), cfg)
    u = np.array([f.values[0, 0, 0] for f in tr.frames])
    assert np.all(np.diff(u) >= 0) and np.all(np.diff(u)[:20] > 0)
    assert u[-1] == pytest.approx(1.0, abs=1e-8)
    assert u.max() <= 1.0 + 1e-12

def test_growth_rate_scales_with_reaction_time():
    # linearised boundary growth: the first-step rate, measured in units of
    # eps^(-2s), is independent of eps once dt is tied to eps^(2s)
    s = 0.5
    rates = []
    for eps in (0.2, 0.1):
        p = FracParam(s, eps=eps)
        g = _grid(s, 16, 64, Zmax=1.0)
        cfg = FlowConfig(p, p.eps2s / 4, p.eps2s / 4)
        u1 = step(g.constant([1e-4, 0.0]), cfg).values[0, 0, 0]
        rates.append((u1 / 1e-4 - 1) / cfg.dt * p.eps2s)
    assert rates[0] > 0 and rates[1] > 0
    assert rates[0] / rates[1] == pytest.approx(1.0, rel=0.3)

@pytest.mark.parametrize("s", SWEEP)
def test_energy_non_increasing(s):
    p = FracParam(s, eps=0.2)
    g = _grid(s, 32, 16)
    U0 = winding_datum(g, p, radius=0.9)
    tr = run_flow(U0, FlowConfig(p, p.eps2s / 2, 20 * p.eps2s))
    E = np.array(tr.meta["energy"])
    assert np.all(np.diff(E) <= 1e-12 * E[0])
    assert E[-1] < E[0]

def test_energy_values():
    p = FracParam(0.7, eps=0.3)
    g = _grid(0.7, 16, 8, Zmax=2.5)
    assert energy_F(g.constant([0.6, 0.8]), p) == (0.0, 0.0, 0.0)
    bulk, pot, tot = energy_F(g.constant([0.0, 0.0]), p)
    assert bulk == 0.0 and pot == pytest.approx(1 / (4 * p.eps2s), rel=1e-14)
    q = FracParam(0.7, eps=0.3 * 2 ** (1 / 1.4))  # doubles eps^(2s)
    assert energy_F(g.constant([0.0, 0.0]), q)[1] == pytest.approx(pot / 2, rel=1e-12)
    U = perturbative_datum(g, p, 0.1)
    assert initial_energy_E0(U, p) == pytest.approx(2 * energy_F(U, p)[0], rel=1e-12)
    assert initial_energy_E0(U, p) == pytest.approx(weighted_integral(full_gradient_sq(U)))

def test_sphere_overshoot_is_bounded():
    s = 0.7
    ratios = []
    for div in (2, 4, 8):
        p = FracParam(s, eps=0.2)
        g = _grid(s, 32, 16)
        cfg = FlowConfig(p, p.eps2s / div, 10 * p.eps2s)
        tr = run_flow(perturbative_datum(g, p, 0.3, q=[0.7, 0.0]), cfg)
        top = max(float(np.max(f.trace.norm())) for f in tr.frames)
        ratios.append(max(top - 1.0, 0.0) / (cfg.dt / p.eps2s))
    assert all(np.isfinite(r) and r < 1.0 for r in ratios)

def test_flow_commutes_with_translation():
    s = 0.7
    p = FracParam(s, eps=0.2)
    g = _grid(s, 32, 8)
    U = winding_datum(g, p, radius=0.8)
    shifted = g.field(np.roll(U.values, 5, axis=1))
    cfg = FlowConfig(p, p.eps2s / 2, 3 * p.eps2s)
    a, b = run_flow(U, cfg)[-1], run_flow(shifted, cfg)[-1]
    np.testing.assert_allclose(np.roll(a.values, 5, axis=1), b.values, atol=1e-12)

def test_blow_up_warning():
    p = FracParam(0.5, eps=0.2)
    g = _grid(0.5, 16, 8)
    with pytest.warns(BlowUpWarning):
        step(g.constant([1.4, 0.0]), FlowConfig(p, p.eps2s, p.eps2s, blowup_bound=1.01,
                                               stabilization=0.0))

def test_catalog_data():
    s = 0.6
    p = FracParam(s)
    g = _grid(s, 16, 8)
    U = perturbative_datum(g, p, 0.05)
    np.testing.assert_allclose(U.trace.values[:, 1], 0.05 * np.cos(2 * np.pi * g.thin.axis), atol=1e-14)
    W = winding_datum(g, p, k=2)
    np.testing.assert_allclose(W.trace.norm(), 1.0, atol=1e-14)
    assert perturbative_datum(g, p, 0.1, q=[1.0]).ell == 1

# Bochner ------------------------------------------------------------------------

def test_bochner_density_of_stationary_flow_is_zero():
    p = FracParam(0.7, eps=0.2)
    g = _grid(0.7, 16, 8)
    tr = run_flow(g.constant([0.0, 1.0]), FlowConfig(p, p.eps2s / 2, 2 * p.eps2s))
    assert np.max(bochner_density(tr, 1).values) < 1e-8
    with pytest.raises(DomainError):
        bochner_density(tr, 0)

def test_bochner_audit_refinement_pair():
    s = 0.7
    p = FracParam(s, eps=0.2)
    fine_g = _grid(s, 32, 16)
    dt = p.eps2s / 4
    fine = run_flow(perturbative_datum(fine_g, p, 0.05), FlowConfig(p, dt, 12 * dt))
    coarse_g = coarsen(fine_g.constant(0.0)).grid
    coarse = run_flow(perturbative_datum(coarse_g, p, 0.05), FlowConfig(p, 2 * dt, 12 * dt))
    rep = bochner_audit(fine, p, coarse)
    assert rep.provenance == "refinement-pair"
    assert np.isfinite(rep.residual) and rep.residual >= 0
    assert rep.metadata["mu"] == 1e-8
    bare = bochner_audit(fine, p)
    assert bare.provenance == "analytic" and bare.tolerance == pytest.approx(1e-12)

@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 0.95), st.floats(0.0, 0.3))
def test_property_energy_dissipation(s, delta):
    p = FracParam(s, eps=0.25)
    g = _grid(s, 16, 8)
    tr = run_flow(perturbative_datum(g, p, delta, q=[0.9, 0.0]), FlowConfig(p, p.eps2s / 2, 4 * p.eps2s))
    E = np.array(tr.meta["energy"])
    assert np.all(np.diff(E) <= 1e-12 * max(E[0], 1.0))
