"""Phase-space grids, kinetic geometry, and the discrete field container."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "VelocityGrid",
    "SpatialGrid",
    "KineticPoint",
    "PhaseField",
    "kinetic_distance",
    "dilate",
    "mollify_initial_data",
]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform cell-centered cube [-radius, radius]^3.

    The node count per axis must be even so the grid is symmetric about
    v = 0 (nodes sit at +-spacing/2, never on the origin).
    """

    n: int
    radius: float

    def __post_init__(self):
        if self.n < 2 or self.n % 2 != 0:
            raise ValueError("velocity grid needs an even node count >= 2")
        if not self.radius > 0:
            raise ValueError("velocity radius must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / self.n

    @property
    def axis(self) -> np.ndarray:
        """Cell-centered 1D node coordinates."""
        return _velocity_axis(self.n, self.radius)

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    def meshes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _velocity_meshes(self.n, self.radius)

    def speed_squared(self) -> np.ndarray:
        return _speed_squared(self.n, self.radius)

    def bracket(self) -> np.ndarray:
        """Smooth velocity magnitude sqrt(1 + |v|^2) on the grid."""
        return _bracket_mesh(self.n, self.radius)

    def nearest_index(self, v) -> tuple[int, int, int]:
        ax = self.axis
        v = np.asarray(v, dtype=float)
        return tuple(int(np.clip(np.rint((c + self.radius) / self.spacing - 0.5), 0, self.n - 1)) for c in v)


@functools.lru_cache(maxsize=64)
def _velocity_axis(n: int, radius: float) -> np.ndarray:
    dv = 2.0 * radius / n
    return _readonly(-radius + (np.arange(n) + 0.5) * dv)


@functools.lru_cache(maxsize=32)
def _velocity_meshes(n: int, radius: float):
    ax = _velocity_axis(n, radius)
    m = np.meshgrid(ax, ax, ax, indexing="ij")
    return tuple(_readonly(c) for c in m)


@functools.lru_cache(maxsize=32)
def _speed_squared(n: int, radius: float) -> np.ndarray:
    v1, v2, v3 = _velocity_meshes(n, radius)
    return _readonly(v1 * v1 + v2 * v2 + v3 * v3)


@functools.lru_cache(maxsize=32)
def _bracket_mesh(n: int, radius: float) -> np.ndarray:
    return _readonly(np.sqrt(1.0 + _speed_squared(n, radius)))


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic torus grid; dim = 0 collapses to a single cell (homogeneous)."""

    dim: int
    n: int = 1
    period: float = 1.0

    def __post_init__(self):
        if self.dim not in (0, 1, 3):
            raise ValueError("spatial dim must be 0, 1, or 3")
        if self.dim == 0 and self.n != 1:
            raise ValueError("dim=0 grid has exactly one cell")
        if self.n < 1:
            raise ValueError("spatial node count must be positive")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def count(self) -> int:
        return self.n**self.dim

    @property
    def spacing(self) -> float:
        return self.period / self.n

    @property
    def axis(self) -> np.ndarray:
        return _readonly((np.arange(self.n) + 0.5) * self.spacing)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def node_coords(self) -> np.ndarray:
        """Coordinates of the flattened x nodes, shape (count, 3).

        Unused coordinates are zero; dim=1 grids vary along the first axis.
        """
        out = np.zeros((self.count, 3))
        if self.dim == 1:
            out[:, 0] = self.axis
        elif self.dim == 3:
            ax = self.axis
            g = np.meshgrid(ax, ax, ax, indexing="ij")
            for k in range(3):
                out[:, k] = g[k].ravel()
        return _readonly(out)

    def wrap_offset(self, dx: np.ndarray) -> np.ndarray:
        """Minimal-image representative of a coordinate offset on the torus."""
        if self.dim == 0:
            return np.zeros_like(dx)
        half = 0.5 * self.period
        return (dx + half) % self.period - half


@dataclass(frozen=True)
class KineticPoint:
    """A point (t, x, v) in extended phase space."""

    t: float
    x: tuple[float, float, float] = (0.0, 0.0, 0.0)
    v: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", tuple(float(c) for c in np.asarray(self.x).reshape(3)))
        object.__setattr__(self, "v", tuple(float(c) for c in np.asarray(self.v).reshape(3)))

    def arrays(self) -> tuple[float, np.ndarray, np.ndarray]:
        return float(self.t), np.asarray(self.x), np.asarray(self.v)


@dataclass(frozen=True)
class PhaseField:
    """Discrete f(t, x, v) snapshot on a torus x box grid.

    values has shape (space.count, n_v, n_v, n_v), x-major with the
    flattened spatial index first. Fields are immutable; all operations
    return new instances.
    """

    t: float
    space: SpatialGrid
    velocity: VelocityGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        n = self.velocity.n
        expected = (self.space.count, n, n, n)
        if vals.shape != expected:
            raise ValueError(f"field shape {vals.shape} != {expected}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _readonly(vals))

    @property
    def cell_volume(self) -> float:
        return self.space.cell_volume * self.velocity.cell_volume

    @property
    def nonnegative(self) -> bool:
        """Diagnostic flag; negativity is reported, never enforced."""
        return bool(np.all(self.values >= 0))

    def with_values(self, values: np.ndarray, t: float | None = None) -> "PhaseField":
        return PhaseField(self.t if t is None else float(t), self.space, self.velocity, values)

    def same_grids(self, other: "PhaseField") -> bool:
        return self.space == other.space and self.velocity == other.velocity


def _drift_term(t1, x1, v1, t2, x2, space: SpatialGrid | None = None):
    dx = np.asarray(x2, dtype=float) - np.asarray(x1, dtype=float)
    off = dx - (np.asarray(t2, dtype=float) - np.asarray(t1, dtype=float))[..., None] * np.asarray(v1, dtype=float)
    if space is not None and space.dim >= 1:
        off = space.wrap_offset(off)
    return off


def kinetic_distance_arrays(t1, x1, v1, t2, x2, v2, space: SpatialGrid | None = None) -> np.ndarray:
    """Vectorized kinetic quasi-distance; the first argument carries the drift velocity."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    off = _drift_term(t1, x1, v1, t2, x2, space)
    dv = np.asarray(v2, dtype=float) - np.asarray(v1, dtype=float)
    return (
        np.sqrt(np.abs(t2 - t1))
        + np.cbrt(np.linalg.norm(off, axis=-1))
        + np.linalg.norm(dv, axis=-1)
    )


def kinetic_distance(z1: KineticPoint, z2: KineticPoint) -> float:
    """|t'-t|^(1/2) + |x'-x-(t'-t)v|^(1/3) + |v'-v|, asymmetric as written."""
    t1, x1, v1 = z1.arrays()
    t2, x2, v2 = z2.arrays()
    return float(kinetic_distance_arrays(np.array([t1]), x1[None], v1[None], np.array([t2]), x2[None], v2[None])[0])


def dilate(z: KineticPoint, r: float) -> KineticPoint:
    """Kinetic dilation (t, x, v) -> (r^2 t, r^3 x, r v)."""
    t, x, v = z.arrays()
    return KineticPoint(r * r * t, tuple(r**3 * x), tuple(r * v))


def _bump_profile(s2: np.ndarray) -> np.ndarray:
    """exp(-1/(1-s^2)) on s^2 < 1, zero outside; smooth and compactly supported."""
    out = np.zeros_like(s2)
    inside = s2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s2[inside]))
    return out


def _smooth_transition(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 1 for s <= 1/2, 0 for s >= 1, monotone in between."""

    def ramp(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    s = np.asarray(s, dtype=float)
    a = ramp(2.0 - 2.0 * s)
    b = ramp(2.0 * s - 1.0)
    with np.errstate(invalid="ignore"):
        val = a / (a + b)
    val[s <= 0.5] = 1.0
    val[s >= 1.0] = 0.0
    return val


def radial_cutoff(r: np.ndarray, cut: float) -> np.ndarray:
    """Smooth radial cutoff, 1 inside cut/2 and 0 outside cut."""
    return _smooth_transition(np.asarray(r, dtype=float) / cut)


def mollify_initial_data(raw: PhaseField, eps: float) -> PhaseField:
    """Smooth raw data with a compact bump and cut it off at speed 1/eps.

    The bump is supported in the eps-ball of joint (x, v) offsets, applied
    periodically in x and with zero extension in v; the result is then
    multiplied by a smooth radial velocity cutoff that is 1 inside the
    ball of radius 1/(2 eps) and vanishes outside radius 1/eps.
    """
    from scipy.signal import fftconvolve

    dv = raw.velocity.spacing
    if not eps >= dv:
        raise ValueError(f"smoothing scale {eps} is below the grid spacing {dv}")

    dim = raw.space.dim
    mv = int(np.floor(eps / dv - 1e-12))
    mx = 0
    if dim >= 1:
        mx = int(np.floor(eps / raw.space.spacing - 1e-12))
        mx = min(mx, raw.space.n // 2)

    # Joint (x, v) bump kernel sampled at node offsets inside the eps ball.
    off_v = np.arange(-mv, mv + 1) * dv
    shape_x = (2 * mx + 1,) * dim
    off_x = np.arange(-mx, mx + 1) * (raw.space.spacing if dim else 1.0)
    grids = np.meshgrid(*([off_x] * dim + [off_v] * 3), indexing="ij")
    s2 = sum(g * g for g in grids) / eps**2
    kernel = _bump_profile(s2)
    total = kernel.sum()
    if total <= 0:
        kernel = np.zeros_like(kernel)
        kernel[tuple(m // 2 for m in kernel.shape)] = 1.0
    else:
        kernel = kernel / total

    nx, n = raw.space.n, raw.velocity.n
    field = raw.values.reshape((nx,) * dim + (n, n, n))
    # Zero-pad the v axes, wrap-pad the x axes, then take the valid part.
    padded = np.pad(field, [(0, 0)] * dim + [(mv, mv)] * 3, mode="constant")
    if dim and mx:
        padded = np.pad(padded, [(mx, mx)] * dim + [(0, 0)] * 3, mode="wrap")
    smooth = fftconvolve(padded, kernel.reshape(shape_x + (2 * mv + 1,) * 3), mode="valid")
    if raw.nonnegative:
        smooth = np.clip(smooth, 0.0, None)

    speed = np.sqrt(raw.velocity.speed_squared())
    cut = radial_cutoff(speed, 1.0 / eps)
    smooth = smooth.reshape(raw.space.count, n, n, n) * cut[None]
    return raw.with_values(smooth)
