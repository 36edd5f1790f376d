"""Gaussian-weighted quantities on periodic trajectories.

Trajectories are periodic in ``x``, so whole-space integrals against the
backward Gaussian equal torus integrals against its periodisation (sum over
lattice images of the period cell).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from fracreg.core import DomainError, FracParam, GaussianCenter, gamma, gaussian_truncation_radius
from fracreg.grid import (
    ExtendedField,
    ExtendedGrid,
    ThinGrid,
    Trajectory,
    full_gradient_sq,
)
from fracreg.flow import bochner_density

__all__ = [
    "RangeError",
    "gaussian_prefactor",
    "periodized_gaussian",
    "image_offsets",
    "potential_density",
    "q_terms",
    "integrate_piecewise_linear",
    "slab_integral",
    "phi",
    "field_at",
    "slab_nodes",
    "thin_cylinder_mask",
    "cylinder_mask",
    "e_density",
]


class RangeError(DomainError):
    """Requested time window is not covered by the trajectory."""


def gaussian_prefactor(p: FracParam, m: int, lag: float) -> float:
    return lag ** (-m / 2.0 - 1.0 + p.s) / (gamma(p.s) * (4.0 * math.pi) ** (m / 2.0))


def image_offsets(L: float, lag: float, m: int):
    """Lattice image shifts needed to resolve a Gaussian of time lag ``lag``."""
    K = int(math.ceil((0.5 * L + gaussian_truncation_radius(lag)) / L))
    ks = np.arange(-K, K + 1) * L
    return [np.array(k) for k in itertools.product(ks, repeat=m)]


def _periodized_1d(axis, x0, L, lag):
    K = int(math.ceil((0.5 * L + gaussian_truncation_radius(lag)) / L))
    d = axis[:, None] - x0 + L * np.arange(-K, K + 1)[None, :]
    return np.exp(-d * d / (4.0 * lag)).sum(axis=1)


def periodized_gaussian(grid, p: FracParam, center: GaussianCenter, t: float) -> np.ndarray:
    """Periodised backward Gaussian at every node of ``grid`` (thin or extended)."""
    lag = center.t0 - t
    if lag <= 0:
        raise DomainError("Gaussian evaluated at or after its centre time")
    thin = grid.thin if isinstance(grid, ExtendedGrid) else grid
    if center.m != thin.m:
        raise DomainError("centre dimension does not match the grid")
    vals = np.ones(thin.shape)
    for ax in range(thin.m):
        g1 = _periodized_1d(thin.axis, center.x0[ax], thin.L, lag)
        shape = [1] * thin.m
        shape[ax] = thin.n
        vals = vals * g1.reshape(shape)
    vals = vals * gaussian_prefactor(p, thin.m, lag)
    if isinstance(grid, ExtendedGrid):
        zfac = np.exp(-grid.z_nodes ** 2 / (4.0 * lag)).reshape((-1,) + (1,) * thin.m)
        return zfac * vals[None]
    return vals


def potential_density(u: np.ndarray, p: FracParam) -> np.ndarray:
    """``W(u) = (1 - |u|^2)^2 / (4 eps^(2s))`` per site."""
    return (1.0 - np.sum(u * u, axis=-1)) ** 2 / (4.0 * p.eps2s)


def q_terms(U: ExtendedField, p: FracParam, center: GaussianCenter, t: float,
            gaussian_center: GaussianCenter | None = None) -> tuple[float, float]:
    """``(int z^a |grad U|^2/2 G, int W(u) G)`` at one time slice."""
    gc = gaussian_center or center
    G = periodized_gaussian(U.grid, p, gc, t)
    w = U.grid.node_weights()
    bulk = 0.5 * float(np.sum(w * full_gradient_sq(U).scalar * G))
    pot = float(np.sum(potential_density(U.values[0], p) * G[0]) * U.grid.thin.cell_volume)
    return bulk, pot


def integrate_piecewise_linear(times: np.ndarray, values: np.ndarray, ta: float, tb: float) -> float:
    """Exact integral over ``[ta, tb]`` of the linear interpolant of ``values``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if ta < times[0] - 1e-12 or tb > times[-1] + 1e-12:
        raise RangeError(f"window [{ta}, {tb}] outside [{times[0]}, {times[-1]}]")
    inner = (times > ta) & (times < tb)
    ts = np.concatenate([[ta], times[inner], [tb]])
    vs = np.concatenate([[np.interp(ta, times, values)], values[inner], [np.interp(tb, times, values)]])
    return float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts)))


def _frames_for(traj: Trajectory, ta: float, tb: float, lo: int = 0, hi: int | None = None):
    t = traj.times
    hi = len(traj) - 1 if hi is None else hi
    if ta < t[lo] - 1e-12 or tb > t[hi] + 1e-12:
        raise RangeError(f"window [{ta:.6g}, {tb:.6g}] outside the usable frames "
                         f"[{t[lo]:.6g}, {t[hi]:.6g}]")
    k0 = max(lo, int(np.searchsorted(t, ta, side="right")) - 1)
    k1 = min(hi, int(np.searchsorted(t, tb, side="left")))
    return list(range(k0, k1 + 1))


def slab_integral(traj: Trajectory, ta: float, tb: float, per_frame, lo: int = 0,
                  hi: int | None = None) -> float:
    """``int_ta^tb f(t) dt`` with ``f`` linear between frames; ``per_frame(k) -> float``."""
    ks = _frames_for(traj, ta, tb, lo, hi)
    times = traj.times[ks]
    vals = np.array([per_frame(k) for k in ks])
    if len(ks) == 1:
        return float(vals[0] * (tb - ta))
    return integrate_piecewise_linear(times, vals, ta, tb)


def field_at(traj: Trajectory, t: float) -> ExtendedField:
    """Linear-in-time interpolant of the frames at time ``t``."""
    times = traj.times
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise RangeError(f"time {t:.6g} outside [{times[0]:.6g}, {times[-1]:.6g}]")
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(traj) - 2))
    lam = (t - times[k]) / traj.dt
    if abs(lam) < 1e-12:
        return traj[k]
    if abs(lam - 1.0) < 1e-12:
        return traj[k + 1]
    vals = (1.0 - lam) * traj[k].values + lam * traj[k + 1].values
    return ExtendedField(traj.grid, vals)


def slab_nodes(traj: Trajectory, ta: float, tb: float) -> np.ndarray:
    """``ta``, the frame times strictly inside ``(ta, tb)``, and ``tb``."""
    t = traj.times
    if ta < t[0] - 1e-12 or tb > t[-1] + 1e-12:
        raise RangeError(f"window [{ta:.6g}, {tb:.6g}] outside [{t[0]:.6g}, {t[-1]:.6g}]")
    inner = t[(t > ta + 1e-12) & (t < tb - 1e-12)]
    return np.concatenate([[ta], inner, [tb]])


def phi(traj: Trajectory, Z0: GaussianCenter, R: float, p: FracParam,
        parts: bool = False):
    """Gaussian-weighted energy over the slab ``t0 - 4R^2 < t < t0 - R^2``.

    The integrand is sampled at the frames inside the slab and at its two
    end times (fields interpolated linearly in time), then integrated with
    the trapezoidal rule. Returns the total, or ``(bulk, potential)`` with
    ``parts=True``.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    ta, tb = Z0.t0 - 4.0 * R * R, Z0.t0 - R * R
    nodes = slab_nodes(traj, ta, tb)
    vals = np.array([q_terms(field_at(traj, t), p, Z0, t) for t in nodes])
    bulk = integrate_piecewise_linear(nodes, vals[:, 0], ta, tb)
    pot = integrate_piecewise_linear(nodes, vals[:, 1], ta, tb)
    return (bulk, pot) if parts else bulk + pot


# Cylinders ------------------------------------------------------------------

def _thin_distance(thin: ThinGrid, x0) -> np.ndarray:
    return thin.distance(x0)


def thin_cylinder_mask(thin: ThinGrid, x0, r: float) -> np.ndarray:
    """Sites of the ball ``|x - x0| <= r`` (minimum image)."""
    return _thin_distance(thin, x0) <= r * (1.0 + 1e-12)


def cylinder_mask(grid: ExtendedGrid, x0, r: float, shape: str = "cylinder") -> np.ndarray:
    """Nodes of ``B_r(x0) x [0, r]`` (``shape="cylinder"``) or the half-ball ``|X - X0| <= r``."""
    d = _thin_distance(grid.thin, x0)[None]
    z = grid.z_nodes.reshape((-1,) + (1,) * grid.thin.m)
    tol = r * (1.0 + 1e-12)
    if shape == "cylinder":
        return (d <= tol) & (z <= tol)
    if shape == "half-ball":
        return d * d + z * z <= tol * tol
    raise DomainError(f"unknown region shape {shape!r}")


def e_density(traj: Trajectory, k: int, mu: float = 1e-8) -> np.ndarray:
    """Nodal Bochner density ``|d_t U| + |grad_x U|^2`` at interior frame ``k``."""
    return bochner_density(traj, k, mu).scalar
