"""Approximate stationary fractional harmonic maps and homogeneous test fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fracreg.core import DomainError, FracParam
from fracreg.extension import solve_extension
from fracreg.flow import FlowConfig, energy_F, step
from fracreg.grid import ExtendedField, ExtendedGrid, ThinField, ThinGrid
from fracreg.monitor.fhm import fhm_residual

__all__ = [
    "Candidate",
    "gl_relaxation_candidate",
    "homogeneous_extension",
    "mobius_trace",
    "mobius_candidate",
]


@dataclass
class Candidate:
    """A relaxed field with its residual certificate.

    ``converged`` is False when some stage of the schedule hit ``max_steps``
    before reaching the stationarity tolerance (a partial result).
    """

    field: ExtendedField
    certificate: dict
    converged: bool
    history: list = field(default_factory=list)


def gl_relaxation_candidate(u0: ThinField, p: FracParam, eps_schedule, grid: ExtendedGrid,
                            tol: float = 1e-6, max_steps: int = 2000,
                            dt_factor: float = 1.0) -> Candidate:
    """Run the GL flow to near-stationarity for each ``eps`` in a decreasing schedule.

    Each stage warm-starts from the previous one and uses ``dt = dt_factor *
    eps^(2s)``. Stationarity is ``max |U' - U| / dt <= tol``.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if not eps_schedule or any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise DomainError("eps_schedule must be a non-empty decreasing list")
    if np.max(np.abs(u0.norm() - 1.0)) > 1e-10:
        raise DomainError("u0 must take values on the unit sphere")
    if not 0 < dt_factor <= 1:
        raise DomainError("dt_factor must lie in (0, 1]")
    U = solve_extension(u0, grid, p)
    history = []
    converged = True
    for eps in eps_schedule:
        q = p.with_eps(eps)
        dt = dt_factor * q.eps2s
        cfg = FlowConfig(q, dt, dt)
        rate = np.inf
        k = 0
        for k in range(1, max_steps + 1):
            new = step(U, cfg)
            rate = float(np.max(np.abs(new.values - U.values))) / dt
            U = new
            if rate <= tol:
                break
        stage_ok = rate <= tol
        converged = converged and stage_ok
        history.append({"eps": eps, "steps": k, "rate": rate, "energy": energy_F(U, q)[2],
                        "converged": stage_ok})
    bulk, bnd, con = fhm_residual(U, p)
    cert = {"bulk": bulk, "boundary": bnd, "constraint": con, "eps_final": eps_schedule[-1]}
    return Candidate(U, cert, converged, history)


def homogeneous_extension(g, grid: ExtendedGrid, x0=None, mask_radius: float | None = None):
    """0-homogeneous field ``W(X) = g((X - X0) / |X - X0|)`` sampled on ``grid``.

    ``g`` maps unit vectors (last axis of length ``m + 1``) to values of
    shape ``(..., ell)`` or ``(...)``. Nodes with ``|X - X0| < mask_radius``
    (default ``3h``) are returned in the mask; the singular node itself is
    filled with the mean of ``W`` over the unmasked nodes of the first ring.
    Returns ``(field, mask)``.
    """
    thin = grid.thin
    m = thin.m
    x0 = np.zeros(m) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    if mask_radius is None:
        mask_radius = 3.0 * thin.h
    d = thin.displacement(x0)
    z = grid.z_nodes.reshape((-1,) + (1,) * m)
    X = np.concatenate([np.broadcast_to(d[None], grid.shape + (m,)),
                        np.broadcast_to(z, grid.shape)[..., None]], axis=-1)
    r = np.linalg.norm(X, axis=-1)
    safe = np.where(r > 0, r, 1.0)[..., None]
    omega = X / safe
    omega[r == 0] = np.eye(m + 1)[m]
    vals = np.asarray(g(omega), dtype=float)
    if vals.shape == grid.shape:
        vals = vals[..., None]
    if vals.shape[:-1] != grid.shape:
        raise DomainError("g must return one value (or vector) per node")
    zero = r == 0
    if zero.any():
        ring = (r > 0) & (r <= 1.5 * thin.h + grid.z_nodes[1])
        vals[zero] = vals[ring].mean(axis=0)
    return ExtendedField(grid, vals), r < mask_radius


def mobius_trace(thin: ThinGrid, alpha: float = 0.3, k: int = 1) -> ThinField:
    """Periodic Blaschke map ``B(w) = (w - alpha) / (1 - alpha w)`` of ``w = exp(2 pi i k x / L)``.

    Its holomorphic extension into the half plane is conformal, so for
    ``s = 1/2`` it is an exact half-harmonic map into ``S^1``.
    """
    if thin.m != 1:
        raise DomainError("the Blaschke candidate is defined for m = 1")
    if not abs(alpha) < 1:
        raise DomainError("|alpha| must be below 1")
    w = np.exp(2j * np.pi * k * thin.axis / thin.L)
    b = (w - alpha) / (1.0 - alpha * w)
    return ThinField(thin, np.stack([b.real, b.imag], axis=-1))


def mobius_candidate(grid: ExtendedGrid, p: FracParam, alpha: float = 0.3, k: int = 1,
                     exact: bool = True) -> ExtendedField:
    """Extension of :func:`mobius_trace`.

    ``exact=True`` (``s = 1/2`` only) samples the holomorphic extension
    ``B(exp(2 pi i k (x + i z) / L))`` directly; otherwise the trace is
    extended with :func:`fracreg.extension.solve_extension`.
    """
    thin = grid.thin
    u = mobius_trace(thin, alpha, k)
    if not exact:
        return solve_extension(u, grid, p)
    if abs(p.s - 0.5) > 1e-14:
        raise DomainError("the exact extension is only available for s = 1/2")
    xi = thin.axis[None, :] + 1j * grid.z_nodes[:, None]
    w = np.exp(2j * np.pi * k * xi / thin.L)
    b = (w - alpha) / (1.0 - alpha * w)
    return ExtendedField(grid, np.stack([b.real, b.imag], axis=-1))
