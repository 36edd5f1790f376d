"""Weighted extension problem and its Dirichlet-to-Neumann map.

The discrete operator is the stiffness matrix of piecewise-linear elements
in ``zeta = z**(2s)`` (exact ``z^a`` masses, lumped) combined with the compact
periodic Laplacian in ``x``. It is an M-matrix, so the discrete maximum
principle holds, and the conormal derivative is read off as the trace row of
the stiffness applied to the solution, i.e. the gradient of the discrete
energy with respect to the trace.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import sparse, special
from scipy.sparse.linalg import LinearOperator, cg

from fracreg.core import DomainError, FracParam, delta_s, gamma
from fracreg.grid import ExtendedField, ExtendedGrid, ThinField, ThinGrid

__all__ = [
    "SolverError",
    "periodic_laplacian",
    "weighted_stiffness",
    "dirichlet_energy",
    "pcg",
    "solve_extension",
    "d2n",
    "d2n_normalized",
    "extension_profile",
    "d2n_symbol",
    "spectral_extension",
]


class SolverError(RuntimeError):
    """Iterative solve stopped before reaching its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


def _check_param(grid: ExtendedGrid, p: FracParam):
    if abs(grid.s - p.s) > 1e-14:
        raise DomainError(f"grid built for s={grid.s} but parameter has s={p.s}")


@lru_cache(maxsize=32)
def periodic_laplacian(thin: ThinGrid) -> sparse.csr_matrix:
    """Positive compact Laplacian ``-Delta_h`` on the torus (``2m+1`` point stencil)."""
    n, h = thin.n, thin.h
    e = np.ones(n)
    one_d = sparse.diags([-e[:-1], 2 * e, -e[:-1]], [-1, 0, 1], format="lil")
    one_d[0, n - 1] = -1.0
    one_d[n - 1, 0] = -1.0
    one_d = sparse.csr_matrix(one_d) / h ** 2
    if thin.m == 1:
        return one_d
    eye = sparse.identity(n, format="csr")
    return (sparse.kron(one_d, eye) + sparse.kron(eye, one_d)).tocsr()


def _vertical_stiffness(grid: ExtendedGrid) -> sparse.csr_matrix:
    k = 2.0 * grid.s / grid.element_length
    main = np.zeros(grid.nz + 1)
    main[:-1] += k
    main[1:] += k
    return sparse.diags([-k, main, -k], [-1, 0, 1], format="csr")


@lru_cache(maxsize=32)
def weighted_stiffness(grid: ExtendedGrid) -> sparse.csr_matrix:
    """Matrix of the discrete energy ``sum_i w_i |D_x U_i|^2 + sum_e 2s |dU_e|^2 / h_e``.

    Acts on layer-major flattened scalar fields (per unit thin cell volume).
    """
    eye_x = sparse.identity(grid.thin.size, format="csr")
    vert = sparse.kron(_vertical_stiffness(grid), eye_x)
    horiz = sparse.kron(sparse.diags(grid.weight_quadrature), periodic_laplacian(grid.thin))
    return (vert + horiz).tocsr()


def dirichlet_energy(U: ExtendedField) -> float:
    """Weighted Dirichlet energy ``1/2 int z^a |grad U|^2`` of the discrete field."""
    A = weighted_stiffness(U.grid)
    flat = U.values.reshape(-1, U.ell)
    return 0.5 * U.grid.thin.cell_volume * float(np.sum(flat * (A @ flat)))


def pcg(A, b, x0=None, rtol=1e-10, maxiter=None, diag=None):
    """Jacobi-preconditioned conjugate gradients (``scipy.sparse.linalg.cg``) for SPD ``A``.

    Stops when ``||b - A x|| <= rtol * ||b||``. Returns ``(x, iterations, residual)``.
    """
    n = b.shape[0]
    maxiter = maxiter or 20 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    inv_d = 1.0 / (A.diagonal() if diag is None else diag)
    M = LinearOperator((n, n), matvec=lambda v: inv_d * v, dtype=float)
    count = [0]

    def tick(_):
        count[0] += 1

    x, info = cg(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M, callback=tick)
    res = float(np.linalg.norm(b - A @ x)) / bnorm
    if info != 0 and res > rtol:
        raise SolverError("conjugate gradients did not converge", res, count[0])
    return x, count[0], res


def solve_extension(u: ThinField, grid: ExtendedGrid, p: FracParam,
                    rtol: float = 1e-10, maxiter: int | None = None) -> ExtendedField:
    """Weighted-harmonic extension of ``u`` with Dirichlet cap ``mean(u)`` at ``Zmax``.

    Parameters
    ----------
    u : ThinField
        Trace data on ``grid.thin``.
    grid : ExtendedGrid
    p : FracParam
        Must carry the same ``s`` as the grid.
    rtol : float
        Relative residual target of the conjugate-gradient solve.

    Returns
    -------
    ExtendedField
        Layer 0 equals ``u`` and the top layer equals ``mean(u)``.
    """
    _check_param(grid, p)
    if u.grid != grid.thin:
        raise DomainError("trace lives on a different thin grid")
    N, nz = grid.thin.size, grid.nz
    A = weighted_stiffness(grid)
    interior = slice(N, nz * N)
    A_ii = A[interior, interior]
    out = np.empty(grid.shape + (u.ell,))
    for c in range(u.ell):
        trace = u.values[..., c].reshape(-1)
        # solve for the deviation from the cap value; constants are then exact
        cap = trace.mean()
        full = np.zeros((nz + 1) * N)
        full[:N] = trace - cap
        rhs = -(A[interior, :N] @ full[:N])
        if np.any(rhs):
            x, _, _ = pcg(A_ii, rhs, rtol=rtol, maxiter=maxiter)
            full[interior] = x
        full[:N] = trace
        full[N:] += cap
        out[..., c] = full.reshape(grid.shape)
    return ExtendedField(grid, out)


def d2n(U: ExtendedField, p: FracParam) -> ThinField:
    """Discrete conormal derivative ``-lim z^a dU/dz`` at ``z = 0``.

    Equal to the trace row of the weighted stiffness applied to ``U``; for
    ``U`` constant in ``x`` this is exactly ``-2s (U_1 - U_0) / zeta_1``.
    """
    grid = U.grid
    _check_param(grid, p)
    N = grid.thin.size
    flat = U.values.reshape(-1, U.ell)
    k0 = 2.0 * grid.s / grid.element_length[0]
    vert = k0 * (flat[:N] - flat[N:2 * N])
    horiz = grid.weight_quadrature[0] * (periodic_laplacian(grid.thin) @ flat[:N])
    return ThinField(grid.thin, (vert + horiz).reshape(grid.thin.shape + (U.ell,)))


def d2n_normalized(U: ExtendedField, p: FracParam) -> ThinField:
    """``delta_s * d2n(U)``, which realises ``(-Delta)^s`` on the trace."""
    raw = d2n(U, p)
    return ThinField(raw.grid, delta_s(p) * raw.values)


# Spectral reference ---------------------------------------------------------

def extension_profile(s: float, k, z):
    """Decaying solution of ``phi'' + (a/z) phi' = k^2 phi`` with ``phi(0) = 1``.

    ``phi(z) = 2^(1-s) / Gamma(s) * (k z)^s K_s(k z)``; ``k = 0`` gives 1.
    """
    k = np.asarray(k, dtype=float)
    z = np.asarray(z, dtype=float)
    x = np.broadcast_to(k * z, np.broadcast(k, z).shape).astype(float)
    out = np.ones_like(x)
    pos = x > 0
    xp = x[pos]
    # kve = K_s e^x keeps large arguments finite
    out[pos] = (2.0 ** (1.0 - s) / gamma(s)) * xp ** s * special.kve(s, xp) * np.exp(-xp)
    return out[()] if out.ndim == 0 else out


def d2n_symbol(p: FracParam, k):
    """Exact conormal multiplier ``delta_s^-1 k^(2s)`` for angular wavenumber ``k``."""
    return np.asarray(k, dtype=float) ** (2.0 * p.s) / delta_s(p)


def _wavenumbers(thin: ThinGrid) -> np.ndarray:
    freq = np.fft.fftfreq(thin.n, d=thin.h)
    mesh = np.meshgrid(*([freq] * thin.m), indexing="ij")
    return 2.0 * math.pi * np.sqrt(sum(f * f for f in mesh))


def spectral_extension(u: ThinField, p: FracParam, z: float) -> ThinField:
    """Exact half-space extension of the trigonometric interpolant of ``u`` at height ``z``."""
    if z < 0:
        raise DomainError("height must be nonnegative")
    if z == 0:
        return ThinField(u.grid, u.values.copy())
    axes = tuple(range(u.grid.m))
    k = _wavenumbers(u.grid)
    mult = extension_profile(p.s, k, z)[..., None]
    uh = np.fft.fftn(u.values, axes=axes)
    return ThinField(u.grid, np.real(np.fft.ifftn(uh * mult, axes=axes)))
