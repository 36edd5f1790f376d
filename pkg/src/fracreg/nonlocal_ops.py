"""Kernel discretisations of the thin-space nonlocal operators.

The fractional Laplacian is a lattice sum against the periodised kernel
``c_{m,s}|y|^{-m-2s}``. The self cell is handled by the zeta-regularised
Taylor correction: the difference between ``int |y|^2 K`` and its lattice sum
is the constant ``C_1 h^(2-2s)``, which multiplies ``-Delta u / (2m)``.

The parabolic operator ``(d_t - Delta)^s`` uses the discrete heat semigroup
in space and exact product integration of the piecewise-linear-in-time
interpolant of the frames against ``tau^(-1-s)``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from fracreg.core import DomainError, FracParam, abs_gamma_neg, c_ms
from fracreg.extension import periodic_laplacian
from fracreg.grid import ThinField, ThinGrid, Trajectory

__all__ = [
    "IMAGES",
    "lattice_weights",
    "singular_constant",
    "frac_laplacian",
    "frac_laplacian_matrix",
    "frac_gradient_sq",
    "discrete_symbol",
    "frac_heat",
    "xi_s_sq",
    "xi_s",
    "xi_identity_residual",
    "link_kernel",
    "sphere_link_op",
    "link_orthogonality_residual",
]

IMAGES = 3


def _dirichlet_beta(x: float) -> float:
    # beta(x) = 1/Gamma(x) int_0^inf t^(x-1) e^(-t) / (1 + e^(-2t)) dt
    def g(t):
        return math.exp(-t) / (1.0 + math.exp(-2.0 * t))

    # algebraic weight absorbs the endpoint singularity t^(x-1)
    head, _ = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(x - 1.0, 0.0), epsabs=0.0, epsrel=1e-13)
    tail, _ = integrate.quad(lambda t: t ** (x - 1.0) * g(t), 1.0, np.inf, limit=200,
                             epsabs=0.0, epsrel=1e-13)
    return (head + tail) / math.gamma(x)


@lru_cache(maxsize=64)
def singular_constant(s: float, m: int) -> float:
    """``lim_R [int_{|y|<R} |y|^2 K - sum_{0<|j|<R} |j|^2 K(j)]`` on the unit lattice."""
    c = c_ms(FracParam(s=s, s0=min(s, 0.5)), m)
    if m == 1:
        return -2.0 * c * float(special.zeta(2.0 * s - 1.0))
    if m == 2:
        # Epstein zeta of the square lattice: sum |j|^(-2s) = 4 zeta(s) beta(s)
        return -4.0 * c * float(special.zeta(s)) * _dirichlet_beta(s)
    raise DomainError("only m = 1, 2 are supported")


def _tail_2d(s: float, R: float) -> float:
    # int over the complement of the square [-R, R]^2 of |y|^(-2-2s)
    val, _ = integrate.quad(lambda t: math.cos(t) ** (2.0 * s), 0.0, math.pi / 4.0)
    return 8.0 / (2.0 * s) * R ** (-2.0 * s) * val


@lru_cache(maxsize=32)
def lattice_weights(grid: ThinGrid, s: float) -> tuple[np.ndarray, float]:
    """Periodised kernel weights ``W_j = h^m sum_k K(jh + kL)`` per lattice offset.

    Returns ``(W, tail)`` where ``tail`` is the analytic estimate of the images
    beyond the explicit ones (0 for ``m = 1``, where the image sum is exact).
    ``W`` has shape ``grid.shape`` and ``W[0] = 0``.
    """
    p = FracParam(s=s, s0=min(s, 0.5))
    c = c_ms(p, grid.m)
    h, L, n = grid.h, grid.L, grid.n
    frac = (np.arange(n) / n)  # offset / L in [0, 1)
    if grid.m == 1:
        expo = 1.0 + 2.0 * s
        W = np.zeros(n)
        q = frac[1:]
        # sum_k |q + k|^-expo = zeta(expo, q) + zeta(expo, 1 - q)
        W[1:] = c * h * L ** (-expo) * (special.zeta(expo, q) + special.zeta(expo, 1.0 - q))
        return W, 0.0
    expo = 2.0 + 2.0 * s
    # centred offsets keep the truncated image window symmetric, so W_j = W_-j
    frac = ((np.arange(n) + n // 2) % n - n // 2) / n
    ks = np.arange(-IMAGES, IMAGES + 1)
    W = np.zeros((n, n))
    for sign_x in (1.0, -1.0):
        for sign_y in (1.0, -1.0):
            dx = sign_x * (frac * L)[:, None, None, None] + ks[None, None, :, None] * L
            dy = sign_y * (frac * L)[None, :, None, None] + ks[None, None, None, :] * L
            r2 = dx * dx + dy * dy
            with np.errstate(divide="ignore"):
                vals = np.where(r2 > 0, r2 ** (-expo / 2.0), 0.0)
            W += 0.25 * vals.sum(axis=(2, 3))
    tail = _tail_2d(s, (IMAGES + 0.5) * L) / L ** 2
    W = c * h ** 2 * (W + tail)
    W[0, 0] = 0.0
    return W, c * h ** 2 * tail


@lru_cache(maxsize=16)
def frac_laplacian_matrix(grid: ThinGrid, s: float) -> np.ndarray:
    """Dense symmetric matrix of the discrete ``(-Delta)^s`` (acts on flattened sites)."""
    W, _ = lattice_weights(grid, s)
    n, m = grid.n, grid.m
    idx = np.indices(grid.shape).reshape(m, -1).T  # site multi-indices
    off = (idx[None, :, :] - idx[:, None, :]) % n
    circ = W[tuple(off[..., k] for k in range(m))]
    M = np.diag(circ.sum(axis=1)) - circ
    corr = 0.5 * singular_constant(s, m) * grid.h ** (2.0 - 2.0 * s) / m
    M = M + corr * periodic_laplacian(grid).toarray()
    return 0.5 * (M + M.T)


def frac_laplacian(u: ThinField, p: FracParam) -> ThinField:
    """Fractional Laplacian ``(-Delta)^s u`` of a periodic lattice field (componentwise)."""
    M = frac_laplacian_matrix(u.grid, p.s)
    flat = u.values.reshape(-1, u.ell)
    return ThinField(u.grid, (M @ flat).reshape(u.values.shape))


def frac_gradient_sq(u: ThinField, p: FracParam) -> ThinField:
    """Fractional gradient density ``|d_s u|^2``.

    Uses the same weights and self-cell correction as :func:`frac_laplacian`,
    so ``<(-Delta)^s u, u> = sum |d_s u|^2 h^m`` holds exactly and
    ``u . (-Delta)^s u = |d_s u|^2`` holds pointwise when ``|u| = 1``.
    """
    grid = u.grid
    W, _ = lattice_weights(grid, p.s)
    out = np.zeros(grid.shape)
    for off in zip(*np.nonzero(W)):
        shifted = np.roll(u.values, tuple(-o for o in off), axis=tuple(range(grid.m)))
        out += 0.5 * W[off] * np.sum((u.values - shifted) ** 2, axis=-1)
    corr = 0.5 * singular_constant(p.s, grid.m) * grid.h ** (2.0 - 2.0 * p.s) / grid.m
    for ax in range(grid.m):
        fwd = np.sum((np.roll(u.values, -1, axis=ax) - u.values) ** 2, axis=-1) / grid.h ** 2
        out += corr * 0.5 * (fwd + np.roll(fwd, 1, axis=ax))
    return ThinField(grid, out)


# Parabolic operator ---------------------------------------------------------

def discrete_symbol(grid: ThinGrid) -> np.ndarray:
    """Eigenvalues of the compact ``-Delta_h`` on the FFT modes, shape ``grid.shape``."""
    one = (4.0 / grid.h ** 2) * np.sin(np.pi * np.fft.fftfreq(grid.n)) ** 2
    mesh = np.meshgrid(*([one] * grid.m), indexing="ij")
    return sum(mesh)


def _inc_pos(q, lam, a, b):
    """``int_a^b exp(-lam t) t^(q-1) dt`` for ``q > 0``; ``b`` may be ``inf``."""
    lam = np.asarray(lam, dtype=float)
    out = np.empty(np.broadcast(lam, a, b).shape)
    lam_b = np.broadcast_to(lam, out.shape)
    a_b = np.broadcast_to(np.asarray(a, float), out.shape)
    b_b = np.broadcast_to(np.asarray(b, float), out.shape)
    zero = lam_b == 0
    with np.errstate(invalid="ignore", over="ignore"):
        out[zero] = (b_b[zero] ** q - a_b[zero] ** q) / q
        nz = ~zero
        la, lb = lam_b[nz] * a_b[nz], lam_b[nz] * b_b[nz]
        upper = la > q
        diff = np.where(upper,
                        special.gammaincc(q, la) - special.gammaincc(q, lb),
                        special.gammainc(q, lb) - special.gammainc(q, la))
        out[nz] = special.gamma(q) * lam_b[nz] ** (-q) * diff
    return out


def _inc_neg(s, lam, a, b):
    """``int_a^b exp(-lam t) t^(-1-s) dt`` for ``a > 0`` by parts; ``b`` may be ``inf``."""
    lam = np.asarray(lam, dtype=float)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    with np.errstate(over="ignore", invalid="ignore"):
        ea = a ** (-s) * np.exp(-lam * a)
        eb = np.where(np.isinf(b), 0.0, b ** (-s) * np.exp(-lam * np.where(np.isinf(b), 0.0, b)))
        tail = _inc_pos(1.0 - s, lam, a, b)
    # the zero mode has no second term (and its integral diverges at b = inf)
    return (ea - eb) / s - np.where(lam == 0, 0.0, (lam / s) * np.where(lam == 0, 0.0, tail))


def _check_thin(traj: Trajectory) -> Trajectory:
    if not traj.is_thin:
        traj = traj.traces()
    return traj


def _fft(values, m):
    return np.fft.fftn(values, axes=tuple(range(m)))


def _ifft(values, m):
    return np.real(np.fft.ifftn(values, axes=tuple(range(m))))


def frac_heat(traj: Trajectory, p: FracParam) -> Trajectory:
    """``(d_t - Delta)^s u`` at every frame of a thin trajectory.

    History before ``t_start`` is the first frame held constant. Each Fourier
    mode is integrated exactly against the discrete heat semigroup for the
    piecewise-linear interpolant in time.
    """
    traj = _check_thin(traj)
    grid, s, dt = traj.grid, p.s, traj.dt
    m = grid.m
    lam = discrete_symbol(grid)[..., None]
    uh = np.stack([_fft(f.values, m) for f in traj.frames])
    G = abs_gamma_neg(s)
    nt = len(traj)
    out = []
    # piecewise integrals only depend on the piece index j
    tau = dt * np.arange(nt + 1)
    I_lin = [_inc_pos(1.0 - s, lam, tau[j], tau[j + 1]) for j in range(nt)]
    I_neg = [None] + [_inc_neg(s, lam, tau[j], tau[j + 1]) for j in range(1, nt)]
    with np.errstate(divide="ignore"):
        lam_s = np.where(lam > 0, lam, 0.0) ** s
    for n in range(nt):
        acc = uh[n] * lam_s * G
        for j in range(n):
            beta = -(uh[n - j - 1] - uh[n - j]) / dt
            alpha = (uh[n] - uh[n - j]) - beta * tau[j]
            acc = acc + beta * I_lin[j]
            if j > 0:
                acc = acc + alpha * I_neg[j]
        if n > 0:
            acc = acc + (uh[n] - uh[0]) * _inc_neg(s, lam, tau[n], np.inf)
        out.append(ThinField(grid, _ifft(acc, m) / G))
    return Trajectory(out, dt, traj.t_start, traj.meta)


def _interp_frames(frames, n, tau, dt):
    # u(t_n - tau) from the piecewise-linear interpolant with constant history
    pos = n - tau / dt
    if pos <= 0:
        return frames[0]
    k = int(math.floor(pos))
    th = pos - k
    if k >= n:
        return frames[n]
    return (1.0 - th) * frames[k] + th * frames[k + 1]


def xi_s_sq(traj: Trajectory, p: FracParam, nodes: int = 10) -> Trajectory:
    """``|Xi_s u|^2`` per frame by Gauss quadrature of squared increments.

    ``Q(tau) = P_tau |u(t - tau)|^2 - 2 u(t) . P_tau u(t - tau) + |u(t)|^2`` is
    integrated against ``tau^(-1-s)`` piece by piece (Gauss-Jacobi on the
    first piece, Gauss-Legendre after, closed form for the constant history).
    """
    traj = _check_thin(traj)
    grid, s, dt = traj.grid, p.s, traj.dt
    m = grid.m
    lam = discrete_symbol(grid)
    frames = [f.values for f in traj.frames]
    G = abs_gamma_neg(s)

    def Q(n, tau):
        w = _interp_frames(frames, n, tau, dt)
        decay = np.exp(-lam * tau)
        Pw = _ifft(_fft(w, m) * decay[..., None], m)
        Pw2 = _ifft(_fft(np.sum(w * w, axis=-1), m) * decay, m)
        un = frames[n]
        return Pw2 - 2.0 * np.sum(un * Pw, axis=-1) + np.sum(un * un, axis=-1)

    xj, wj = special.roots_jacobi(nodes, 0.0, -s)
    xl, wl = np.polynomial.legendre.leggauss(nodes)
    out = []
    for n in range(len(frames)):
        total = np.zeros(grid.shape)
        if n > 0:
            for x, w in zip(xj, wj):
                tau = 0.5 * dt * (1.0 + x)
                total += w * (0.5 * dt) ** (1.0 - s) * Q(n, tau) / tau
            for j in range(1, n):
                for x, w in zip(xl, wl):
                    tau = dt * (j + 0.5 * (1.0 + x))
                    total += 0.5 * dt * w * Q(n, tau) * tau ** (-1.0 - s)
        T = n * dt
        un, u0 = frames[n], frames[0]
        if T == 0:
            # constant history at the first frame: only the spatial part survives
            T_tail = 0.0
        else:
            T_tail = T
        if T_tail > 0:
            k_tail = _inc_neg(s, lam, T_tail, np.inf)
            k0 = T_tail ** (-s) / s
            Pu0 = _ifft(_fft(u0, m) * k_tail[..., None], m)
            Pu02 = _ifft(_fft(np.sum(u0 * u0, axis=-1), m) * k_tail, m)
            total += Pu02 - 2.0 * np.sum(un * Pu0, axis=-1) + np.sum(un * un, axis=-1) * k0
        else:
            total += _static_xi_sq(un, lam, s, m)
        out.append(ThinField(grid, np.maximum(0.5 * total / G, 0.0)))
    return Trajectory(out, dt, traj.t_start, traj.meta)


def _static_xi_sq(u, lam, s, m):
    # int_0^inf Q(tau) tau^(-1-s) for time-independent u, per Fourier mode
    # Q = P|u|^2 - 2 u.Pu + |u|^2, and int (1 - e^{-lam tau}) tau^{-1-s} = |Gamma(-s)| lam^s
    G = abs_gamma_neg(s)
    lam_s = lam ** s * G
    Lu = _ifft(_fft(u, m) * lam_s[..., None], m)
    Lu2 = _ifft(_fft(np.sum(u * u, axis=-1), m) * lam_s, m)
    return 2.0 * np.sum(u * Lu, axis=-1) - Lu2


def xi_s(traj: Trajectory, p: FracParam, nodes: int = 10) -> Trajectory:
    """``Xi_s u`` per frame (square root of :func:`xi_s_sq`)."""
    sq = xi_s_sq(traj, p, nodes)
    return Trajectory([ThinField(f.grid, np.sqrt(f.values)) for f in sq.frames],
                      sq.dt, sq.t_start, sq.meta)


def xi_identity_residual(traj: Trajectory, p: FracParam, nodes: int = 10) -> np.ndarray:
    """Per-frame max of ``|(d_t-Delta)^s(|u|^2/2) - u.(d_t-Delta)^s u + |Xi_s u|^2|``."""
    traj = _check_thin(traj)
    half_sq = Trajectory([ThinField(f.grid, 0.5 * np.sum(f.values ** 2, axis=-1))
                          for f in traj.frames], traj.dt, traj.t_start)
    lhs = frac_heat(half_sq, p)
    Au = frac_heat(traj, p)
    xi2 = xi_s_sq(traj, p, nodes)
    res = []
    for k in range(len(traj)):
        r = (lhs[k].scalar - np.sum(traj[k].values * Au[k].values, axis=-1) + xi2[k].scalar)
        res.append(float(np.max(np.abs(r))))
    return np.asarray(res)


# Link operator --------------------------------------------------------------

def link_kernel(s: float, psi) -> np.ndarray:
    """Averaged kernel ``int_0^inf t (1 + t^2 - 2t cos psi)^(-1-s) dt`` on the circle."""
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    out = np.empty_like(psi)
    for i, ang in enumerate(psi):
        c = math.cos(ang)

        def f(t):
            return (t + t ** (2.0 * s - 1.0)) * (1.0 + t * t - 2.0 * t * c) ** (-1.0 - s)

        pts = [c] if 0.0 < c < 1.0 else None
        val, _ = integrate.quad(f, 0.0, 1.0, points=pts, limit=400, epsabs=0.0, epsrel=1e-12)
        out[i] = val
    return out


def _link_singular_coeff(s: float) -> float:
    return math.sqrt(math.pi) * math.gamma(s + 0.5) / math.gamma(1.0 + s)


@lru_cache(maxsize=16)
def _link_matrix(M: int, s: float) -> np.ndarray:
    dth = 2.0 * math.pi / M
    p = FracParam(s=s, s0=min(s, 0.5))
    c = c_ms(p, 2)
    psi = dth * np.arange(1, M)
    K = c * link_kernel(s, np.minimum(psi, 2.0 * math.pi - psi))
    row = np.concatenate([[0.0], K * dth])
    idx = (np.arange(M)[None, :] - np.arange(M)[:, None]) % M
    circ = row[idx]
    A = np.diag(circ.sum(axis=1)) - circ
    # self-cell correction from the leading singularity C |psi|^(-1-2s)
    C1 = -2.0 * c * _link_singular_coeff(s) * float(special.zeta(2.0 * s - 1.0))
    lap = (2.0 * np.eye(M) - np.roll(np.eye(M), 1, axis=1) - np.roll(np.eye(M), -1, axis=1)) / dth ** 2
    return A + 0.5 * C1 * dth ** (2.0 - 2.0 * s) * lap


def sphere_link_op(g, p: FracParam, n: int = 2) -> np.ndarray:
    """Link operator acting on ``g`` sampled at ``M`` equispaced angles.

    ``g`` has shape ``(M,)`` or ``(M, ell)``. The kernel is normalised with
    ``c_{2,s}`` so that it agrees with the planar operator on 0-homogeneous
    functions.
    """
    if n != 2:
        raise DomainError("only the circle link (n = 2) is supported")
    g = np.asarray(g, dtype=float)
    M = g.shape[0]
    if M < 8:
        raise DomainError("need at least 8 angular samples")
    return _link_matrix(M, p.s) @ g


def link_orthogonality_residual(g, p: FracParam) -> float:
    """Max norm of the tangential part of the link operator for sphere-valued ``g``."""
    g = np.asarray(g, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    Lg = sphere_link_op(g, p)
    tangential = Lg - np.sum(Lg * g, axis=-1, keepdims=True) * g
    return float(np.max(np.linalg.norm(tangential, axis=-1)))
