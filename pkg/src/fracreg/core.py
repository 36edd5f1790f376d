"""Constants, kernels and special functions shared by every other module.

All functions here are pure and cheap; arrays are accepted wherever the
formula is elementwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

__all__ = [
    "FracParam",
    "GaussianCenter",
    "DomainError",
    "gamma",
    "abs_gamma_neg",
    "delta_s",
    "c_ms",
    "heat_kernel_H",
    "space_kernel_K",
    "gaussian_G",
    "mittag_leffler",
]


class DomainError(ValueError):
    """Argument outside the domain where a formula is defined."""


@dataclass(frozen=True)
class FracParam:
    """Order ``s``, relaxation length ``eps`` and uniformity floor ``s0``.

    The weight exponent ``a = 1 - 2s`` is derived, never stored separately,
    so it cannot drift from ``s``.
    """

    s: float
    eps: float = 0.1
    s0: float = 0.5
    a: float = field(init=False)

    def __post_init__(self):
        s, s0 = float(self.s), float(self.s0)
        if not (0.0 < s0 <= s < 1.0):
            raise DomainError(f"need 0 < s0 <= s < 1, got s0={s0}, s={s}")
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "a", 1.0 - 2.0 * s)

    def with_s(self, s: float) -> "FracParam":
        return FracParam(s=s, eps=self.eps, s0=min(self.s0, s))

    def with_eps(self, eps: float) -> "FracParam":
        return FracParam(s=self.s, eps=eps, s0=self.s0)

    @property
    def eps2s(self) -> float:
        """``eps ** (2 s)``, the natural reaction time scale."""
        return self.eps ** (2.0 * self.s)


@dataclass(frozen=True)
class GaussianCenter:
    """Space-time point ``(x0, t0)`` on the thin boundary ``z = 0``."""

    x0: tuple
    t0: float

    def __post_init__(self):
        x0 = tuple(float(v) for v in np.atleast_1d(self.x0))
        object.__setattr__(self, "x0", x0)
        if not self.t0 > 0:
            raise DomainError(f"t0 must be positive, got {self.t0}")

    @property
    def m(self) -> int:
        return len(self.x0)


def gamma(x: float) -> float:
    """Euler Gamma function for positive arguments."""
    if not x > 0:
        raise DomainError(f"gamma needs a positive argument, got {x}")
    return math.gamma(x)


def abs_gamma_neg(s: float) -> float:
    """``|Gamma(-s)| = Gamma(1 - s) / s`` for ``s`` in (0, 1)."""
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must lie in (0, 1), got {s}")
    return math.gamma(1.0 - s) / s


def delta_s(p: FracParam) -> float:
    """Normalisation ``2^(2s-1) Gamma(s) / Gamma(1-s)`` of the extension energy."""
    s = p.s
    return 2.0 ** (2.0 * s - 1.0) * gamma(s) / gamma(1.0 - s)


def c_ms(p: FracParam, m: int) -> float:
    """Kernel constant of the fractional Laplacian in dimension ``m``."""
    if m < 1:
        raise DomainError(f"dimension must be >= 1, got {m}")
    s = p.s
    return (s * 2.0 ** (2.0 * s) * gamma((m + 2.0 * s) / 2.0)
            / (math.pi ** (m / 2.0) * gamma(1.0 - s)))


def _norm(z, m):
    z = np.asarray(z, dtype=float)
    if m == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        return np.abs(z)
    return np.sqrt(np.sum(z * z, axis=-1))


def heat_kernel_H(p: FracParam, m: int, z, tau):
    """Space-time kernel of ``(d_t - Delta)^s``.

    ``z`` is a point (or array of points, last axis of length ``m``; for
    ``m = 1`` plain scalars are accepted) and ``tau > 0``.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise DomainError("tau must be positive")
    r2 = _norm(z, m) ** 2
    s = p.s
    out = ((4.0 * math.pi) ** (-m / 2.0) / abs_gamma_neg(s)
           * np.exp(-r2 / (4.0 * tau)) * tau ** (-m / 2.0 - 1.0 - s))
    return out[()] if np.ndim(out) == 0 else out


def space_kernel_K(p: FracParam, m: int, z):
    """Kernel ``c_{m,s} |z|^{-m-2s}`` of ``(-Delta)^s``; ``z`` must be nonzero."""
    r = _norm(z, m)
    if np.any(r == 0):
        raise DomainError("space kernel is singular at z = 0")
    out = c_ms(p, m) * r ** (-m - 2.0 * p.s)
    return out[()] if np.ndim(out) == 0 else out


def gaussian_G(p: FracParam, m: int, center: GaussianCenter, X, t):
    """Backward fundamental solution centred at ``center``.

    ``X`` has last axis of length ``m + 1`` (thin coordinates then ``z``);
    ``t`` must be strictly before ``center.t0``.
    """
    t = np.asarray(t, dtype=float)
    lag = center.t0 - t
    if np.any(lag <= 0):
        raise DomainError("gaussian_G needs t < t0")
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != m + 1:
        raise DomainError(f"points must have {m + 1} coordinates")
    d = X.copy()
    d[..., :m] -= np.asarray(center.x0, dtype=float)
    r2 = np.sum(d * d, axis=-1)
    s = p.s
    out = (np.exp(-r2 / (4.0 * lag)) * lag ** (-m / 2.0 - 1.0 + s)
           / (gamma(s) * (4.0 * math.pi) ** (m / 2.0)))
    return out[()] if np.ndim(out) == 0 else out


def gaussian_truncation_radius(lag: float) -> float:
    """Radius beyond which Gaussian tails are dropped: ``8 sqrt(4 lag)``."""
    return 8.0 * math.sqrt(4.0 * lag)


# Mittag-Leffler -------------------------------------------------------------

ML_SERIES_RADIUS = 1.0


def _ml_series(alpha: float, x: float) -> float:
    total, k = 0.0, 0
    logx = math.log(abs(x)) if x != 0 else -math.inf
    while True:
        if x == 0:
            return 1.0
        mag = math.exp(k * logx - math.lgamma(alpha * k + 1.0))
        term = mag if (x > 0 or k % 2 == 0) else -mag
        total += term
        k += 1
        if k > 8 and mag < 1e-18 * max(1.0, abs(total)):
            return total


def _ml_integral(alpha: float, x: float) -> float:
    # E_a(-r) = sin(a pi)/(a pi) * int_0^inf exp(-(w r)^(1/a)) / (w^2 + 2 w cos(a pi) + 1) dw
    r = -x
    c = math.cos(alpha * math.pi)
    inv = 1.0 / alpha

    def f(w):
        return math.exp(-((w * r) ** inv)) / (w * w + 2.0 * w * c + 1.0)

    wmax = 745.0 ** alpha / r
    peak = -c
    points = [peak] if 0.0 < peak < wmax else None
    val, _ = integrate.quad(f, 0.0, wmax, points=points, limit=400,
                            epsabs=0.0, epsrel=1e-13)
    return math.sin(alpha * math.pi) / (alpha * math.pi) * val


def mittag_leffler(alpha: float, x):
    """One-parameter Mittag-Leffler function ``E_alpha(x)`` for ``x <= 0``.

    Uses the power series for ``|x| <= 1`` and the Laplace-type integral
    representation (adaptive quadrature) beyond. Accepts scalars or arrays.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    xs = np.asarray(x, dtype=float)
    if np.any(xs > 0):
        raise DomainError("only the decaying branch x <= 0 is supported")
    if alpha == 1.0:
        out = np.exp(xs)
    else:
        flat = [(_ml_series(alpha, v) if -v <= ML_SERIES_RADIUS
                 else _ml_integral(alpha, v)) for v in xs.ravel()]
        out = np.asarray(flat).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out
