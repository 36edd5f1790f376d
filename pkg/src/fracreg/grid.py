"""Lattices and fields on the thin torus and the weighted half-space.

The vertical direction is discretised in the graded coordinate
``zeta = z**(2s)``. In that variable the conormal flux ``z^a dU/dz`` equals
``2s dU/dzeta`` and the vertical Dirichlet energy is unweighted, so
piecewise-linear elements in ``zeta`` with exactly integrated ``z^a`` masses
stay accurate uniformly as ``s -> 1``. Node 0 sits on ``z = 0`` and carries
the trace.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from fracreg.core import DomainError

__all__ = [
    "ThinGrid",
    "ThinField",
    "ExtendedGrid",
    "ExtendedField",
    "Trajectory",
    "weighted_integral",
    "thin_integral",
    "horizontal_gradient_sq",
    "vertical_gradient_sq",
    "full_gradient_sq",
    "horizontal_gradient",
    "z_times_dz",
    "coarsen",
    "coarsen_trajectory",
    "write_snapshot",
    "read_snapshot",
    "save_trajectory",
    "load_trajectory",
]

MAGIC = b"FRLB"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class ThinGrid:
    """Periodic lattice of ``n**m`` sites on ``[-L/2, L/2)^m``."""

    m: int
    n: int
    L: float = 1.0

    def __post_init__(self):
        if self.m not in (1, 2):
            raise DomainError(f"thin dimension must be 1 or 2, got {self.m}")
        if self.n < 8 or self.n % 2:
            raise DomainError(f"n must be even and >= 8, got {self.n}")
        if not self.L > 0:
            raise DomainError("period L must be positive")
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.m

    @property
    def size(self) -> int:
        return self.n ** self.m

    @property
    def cell_volume(self) -> float:
        return self.h ** self.m

    @cached_property
    def axis(self) -> np.ndarray:
        return -0.5 * self.L + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> np.ndarray:
        """Site coordinates, shape ``shape + (m,)``."""
        mesh = np.meshgrid(*([self.axis] * self.m), indexing="ij")
        return np.stack(mesh, axis=-1)

    def displacement(self, x0) -> np.ndarray:
        """Minimum-image displacement ``x - x0`` per site, shape ``shape + (m,)``."""
        d = self.coords - np.asarray(x0, dtype=float)
        return d - self.L * np.round(d / self.L)

    def distance(self, x0) -> np.ndarray:
        return np.sqrt(np.sum(self.displacement(x0) ** 2, axis=-1))

    def field(self, values) -> "ThinField":
        return ThinField(self, values)


@dataclass(frozen=True, eq=False)
class ThinField:
    """Values in ``R^ell`` on every lattice site; ``values.shape == grid.shape + (ell,)``."""

    grid: ThinGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape == self.grid.shape:
            v = v[..., None]
        if v.shape[:-1] != self.grid.shape:
            raise DomainError(f"values of shape {v.shape} do not fit {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def ell(self) -> int:
        return self.values.shape[-1]

    @property
    def scalar(self) -> np.ndarray:
        if self.ell != 1:
            raise DomainError("field is not scalar")
        return self.values[..., 0]

    def norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values ** 2, axis=-1))

    def shift(self, k: int, axis: int = 0) -> "ThinField":
        return ThinField(self.grid, np.roll(self.values, k, axis=axis))


class ExtendedGrid:
    """Thin lattice times a graded vertical mesh on ``(0, Zmax)``.

    Vertical nodes are ``zeta_i = Zmax**(2s) * (i/nz)**grading`` for
    ``i = 0..nz``; ``weight_quadrature[i]`` is the exact ``z^a``-mass of the
    piecewise-linear hat function of node ``i``.
    """

    def __init__(self, thin: ThinGrid, nz: int, Zmax: float = 1.0, s: float = 0.5,
                 grading: float = 2.0):
        if nz < 2:
            raise DomainError("need at least two vertical intervals")
        if not Zmax > 0:
            raise DomainError("Zmax must be positive")
        if not 0.0 < s < 1.0:
            raise DomainError("s must lie in (0, 1)")
        if not grading >= 1.0:
            raise DomainError("grading exponent must be >= 1")
        self.thin = thin
        self.nz = int(nz)
        self.Zmax = float(Zmax)
        self.s = float(s)
        self.grading = float(grading)

        top = self.Zmax ** (2.0 * self.s)
        zeta = top * (np.arange(self.nz + 1) / self.nz) ** self.grading
        zeta[-1] = top
        self.zeta_nodes = zeta
        self.z_nodes = zeta ** (1.0 / (2.0 * self.s))
        self.z_nodes[-1] = self.Zmax
        self.element_length = np.diff(zeta)
        self._build_masses()

    def _build_masses(self):
        s = self.s
        p = (1.0 - 2.0 * s) / s  # z^a dz = zeta^p dzeta / (2s)
        lo, hi = self.zeta_nodes[:-1], self.zeta_nodes[1:]
        he = self.element_length
        m0 = (hi ** (p + 1) - lo ** (p + 1)) / ((p + 1) * 2 * s)
        m1 = (hi ** (p + 2) - lo ** (p + 2)) / ((p + 2) * 2 * s)
        left = (hi * m0 - m1) / he
        right = (m1 - lo * m0) / he
        w = np.zeros(self.nz + 1)
        w[:-1] += left
        w[1:] += right
        self.element_mass = m0
        self.element_share = np.stack([left, right], axis=1)
        self.weight_quadrature = w

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s

    @property
    def shape(self) -> tuple:
        return (self.nz + 1,) + self.thin.shape

    @property
    def total_mass(self) -> float:
        return self.Zmax ** (2.0 - 2.0 * self.s) / (2.0 - 2.0 * self.s)

    def node_weights(self) -> np.ndarray:
        """Quadrature weight of every node: ``h^m * weight_quadrature``."""
        w = self.weight_quadrature.reshape((-1,) + (1,) * self.thin.m)
        return np.broadcast_to(w * self.thin.cell_volume, self.shape)

    def field(self, values) -> "ExtendedField":
        return ExtendedField(self, values)

    def constant(self, q) -> "ExtendedField":
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return ExtendedField(self, np.broadcast_to(q, self.shape + q.shape).copy())

    def key(self) -> tuple:
        return (self.thin, self.nz, self.Zmax, self.s, self.grading)

    def __eq__(self, other):
        return isinstance(other, ExtendedGrid) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return (f"ExtendedGrid(thin={self.thin!r}, nz={self.nz}, Zmax={self.Zmax}, "
                f"s={self.s}, grading={self.grading})")


@dataclass(frozen=True, eq=False)
class ExtendedField:
    """Values on every (layer, site) node; layer 0 is the trace ``u``."""

    grid: ExtendedGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape == self.grid.shape:
            v = v[..., None]
        if v.shape[:-1] != self.grid.shape:
            raise DomainError(f"values of shape {v.shape} do not fit {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def ell(self) -> int:
        return self.values.shape[-1]

    @property
    def trace(self) -> ThinField:
        return ThinField(self.grid.thin, self.values[0])

    @property
    def scalar(self) -> np.ndarray:
        if self.ell != 1:
            raise DomainError("field is not scalar")
        return self.values[..., 0]


class Trajectory:
    """Time-ordered frames with uniform step ``dt`` starting at ``t_start``.

    Frames are either all ``ExtendedField`` or all ``ThinField`` and share
    one grid.
    """

    def __init__(self, frames, dt: float, t_start: float = 0.0, meta: dict | None = None):
        frames = list(frames)
        if len(frames) < 2:
            raise DomainError("a trajectory needs at least two frames")
        if not dt > 0:
            raise DomainError("dt must be positive")
        kinds = {type(f) for f in frames}
        if len(kinds) != 1:
            raise DomainError("frames must all have the same type")
        g0 = frames[0].grid
        if any(f.grid != g0 for f in frames):
            raise DomainError("frames must share one grid")
        self.frames = frames
        self.dt = float(dt)
        self.t_start = float(t_start)
        self.meta = dict(meta or {})

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, k):
        return self.frames[k]

    @property
    def grid(self):
        return self.frames[0].grid

    @property
    def is_thin(self) -> bool:
        return isinstance(self.frames[0], ThinField)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(len(self.frames))

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * (len(self.frames) - 1)

    def stack(self) -> np.ndarray:
        return np.stack([f.values for f in self.frames])

    def traces(self) -> "Trajectory":
        if self.is_thin:
            return self
        return Trajectory([f.trace for f in self.frames], self.dt, self.t_start, self.meta)

    def time_derivative(self, k: int) -> np.ndarray:
        """Centred difference ``dU/dt`` at interior frame ``k`` (one-sided at ends)."""
        last = len(self.frames) - 1
        if 0 < k < last:
            return (self.frames[k + 1].values - self.frames[k - 1].values) / (2 * self.dt)
        if k == 0:
            return (self.frames[1].values - self.frames[0].values) / self.dt
        if k == last:
            return (self.frames[last].values - self.frames[last - 1].values) / self.dt
        raise IndexError(k)


# Quadrature -----------------------------------------------------------------

def _as_array(f, grid):
    if isinstance(f, ExtendedField):
        if f.ell != 1:
            raise DomainError("weighted_integral needs a scalar field")
        return f.grid, f.values[..., 0]
    if grid is None:
        raise DomainError("pass the grid when integrating a bare array")
    return grid, np.asarray(f, dtype=float)


def weighted_integral(f, grid: ExtendedGrid | None = None) -> float:
    """``int z^a f dX`` over the periodic slab ``(torus) x (0, Zmax)``."""
    grid, arr = _as_array(f, grid)
    return float(np.sum(arr * grid.node_weights()))


def thin_integral(f, grid: ThinGrid | None = None) -> float:
    """Lattice sum ``h^m sum f`` over the torus."""
    if isinstance(f, ThinField):
        grid, f = f.grid, f.scalar
    return float(np.sum(f) * grid.cell_volume)


# Gradients ------------------------------------------------------------------

def _thin_axes(values, m):
    # values carry a leading layer axis and a trailing component axis
    return range(1, 1 + m)


def horizontal_gradient_sq(U: ExtendedField) -> ExtendedField:
    """Pointwise ``|grad_x U|^2`` as the mean of forward and backward squared differences.

    Second order at every node; its lattice sum equals the energy of the
    compact periodic Laplacian used by the solvers.
    """
    h = U.grid.thin.h
    out = np.zeros(U.values.shape[:-1])
    for ax in _thin_axes(U.values, U.grid.thin.m):
        fwd = (np.roll(U.values, -1, axis=ax) - U.values) / h
        sq = np.sum(fwd * fwd, axis=-1)
        out += 0.5 * (sq + np.roll(sq, 1, axis=ax))
    return ExtendedField(U.grid, out)


def horizontal_gradient(U: ExtendedField) -> np.ndarray:
    """Centred periodic differences, shape ``values.shape[:-1] + (m, ell)``."""
    h = U.grid.thin.h
    parts = []
    for ax in _thin_axes(U.values, U.grid.thin.m):
        parts.append((np.roll(U.values, -1, axis=ax) - np.roll(U.values, 1, axis=ax)) / (2 * h))
    return np.stack(parts, axis=-2)


def _element_vertical_energy(U: ExtendedField) -> np.ndarray:
    g = U.grid
    dU = np.diff(U.values, axis=0)
    he = g.element_length.reshape((-1,) + (1,) * (dU.ndim - 1))
    return 2.0 * g.s * np.sum(dU * dU / he, axis=-1)


def vertical_gradient_sq(U: ExtendedField) -> ExtendedField:
    """Nodal ``|dU/dz|^2`` whose ``z^a``-weighted sum is the exact element energy."""
    g = U.grid
    e_el = _element_vertical_energy(U)  # energy of each element per unit thin area
    density = e_el / g.element_mass.reshape((-1,) + (1,) * g.thin.m)
    left = g.element_share[:, 0].reshape((-1,) + (1,) * g.thin.m)
    right = g.element_share[:, 1].reshape((-1,) + (1,) * g.thin.m)
    acc = np.zeros(g.shape)
    acc[:-1] += left * density
    acc[1:] += right * density
    acc /= g.weight_quadrature.reshape((-1,) + (1,) * g.thin.m)
    return ExtendedField(g, acc)


def full_gradient_sq(U: ExtendedField) -> ExtendedField:
    """``|grad U|^2`` with respect to the extended variable ``(x, z)``."""
    return ExtendedField(U.grid, horizontal_gradient_sq(U).values
                         + vertical_gradient_sq(U).values)


def z_times_dz(U: ExtendedField) -> np.ndarray:
    """Nodal ``z dU/dz = 2s zeta dU/dzeta`` (second order on the graded mesh)."""
    g = U.grid
    zeta = g.zeta_nodes
    shape = (-1,) + (1,) * (U.values.ndim - 1)
    d = np.empty_like(U.values)
    hm = (zeta[1:-1] - zeta[:-2]).reshape(shape)
    hp = (zeta[2:] - zeta[1:-1]).reshape(shape)
    v = U.values
    d[1:-1] = (hm ** 2 * v[2:] - hp ** 2 * v[:-2] + (hp ** 2 - hm ** 2) * v[1:-1]) / (hm * hp * (hm + hp))
    d[0] = (v[1] - v[0]) / (zeta[1] - zeta[0])
    d[-1] = (v[-1] - v[-2]) / (zeta[-1] - zeta[-2])
    return 2.0 * g.s * zeta.reshape(shape) * d


# Restriction ----------------------------------------------------------------

def coarsen(field):
    """Restrict a field to every other lattice site (and every other vertical node).

    The graded vertical nodes of ``nz/2`` layers are exactly the even nodes of
    ``nz`` layers, so restriction is injection without interpolation.
    """
    if isinstance(field, ThinField):
        g = field.grid
        if g.n // 2 < 8 or (g.n // 2) % 2:
            raise DomainError("thin lattice too small to coarsen")
        sl = (slice(None, None, 2),) * g.m
        return ThinField(ThinGrid(g.m, g.n // 2, g.L), field.values[sl])
    g = field.grid
    if g.nz % 2:
        raise DomainError("nz must be even to coarsen")
    thin = g.thin
    if thin.n // 2 < 8 or (thin.n // 2) % 2:
        raise DomainError("thin lattice too small to coarsen")
    coarse = ExtendedGrid(ThinGrid(thin.m, thin.n // 2, thin.L), g.nz // 2, g.Zmax, g.s, g.grading)
    sl = (slice(None, None, 2),) * (1 + thin.m)
    return ExtendedField(coarse, field.values[sl])


def coarsen_trajectory(traj: "Trajectory") -> "Trajectory":
    """Restriction in space and every other frame in time (``dt -> 2 dt``)."""
    frames = [coarsen(f) for f in traj.frames[::2]]
    return Trajectory(frames, 2.0 * traj.dt, traj.t_start, traj.meta)


# Snapshots ------------------------------------------------------------------

_HEADER_INTS = struct.Struct("<5I")
_HEADER_FLOATS = struct.Struct("<4d")


def write_snapshot(path, field) -> None:
    """Write a field in the ``FRLB`` binary format (little-endian, row-major)."""
    if isinstance(field, ExtendedField):
        g = field.grid
        thin, nz, s, zmax, grading = g.thin, g.nz, g.s, g.Zmax, g.grading
    elif isinstance(field, ThinField):
        thin, nz, s, zmax, grading = field.grid, 0, float("nan"), float("nan"), float("nan")
    else:
        raise TypeError("expected ThinField or ExtendedField")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER_INTS.pack(SNAPSHOT_VERSION, thin.m, thin.n, nz, field.ell))
        fh.write(_HEADER_FLOATS.pack(s, thin.L, zmax, grading))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not an FRLB snapshot")
    off = 4
    version, m, n, nz, ell = _HEADER_INTS.unpack_from(raw, off)
    off += _HEADER_INTS.size
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    s, L, zmax, grading = _HEADER_FLOATS.unpack_from(raw, off)
    off += _HEADER_FLOATS.size
    thin = ThinGrid(m, n, L)
    data = np.frombuffer(raw, dtype="<f8", offset=off).astype(float)
    if nz == 0:
        return ThinField(thin, data.reshape(thin.shape + (ell,)))
    grid = ExtendedGrid(thin, nz, zmax, s, grading)
    return ExtendedField(grid, data.reshape(grid.shape + (ell,)))


def save_trajectory(directory, traj: Trajectory, extra: dict | None = None) -> Path:
    """One snapshot per frame plus ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for k, frame in enumerate(traj.frames):
        name = f"frame_{k:05d}.frlb"
        write_snapshot(directory / name, frame)
        names.append(name)
    manifest = {
        "dt": traj.dt,
        "t_start": traj.t_start,
        "times": [float(t) for t in traj.times],
        "frames": names,
        "meta": traj.meta,
    }
    if extra:
        manifest.update(extra)
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_trajectory(directory) -> Trajectory:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    frames = [read_snapshot(directory / name) for name in manifest["frames"]]
    return Trajectory(frames, manifest["dt"], manifest["t_start"], manifest.get("meta"))
