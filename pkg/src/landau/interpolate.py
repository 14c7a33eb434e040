"""Multilinear field sampling: periodic in x, zero-extended in v."""

from __future__ import annotations

import numpy as np

from .grids import PhaseField

__all__ = ["sample_field"]


def sample_field(field: PhaseField, x_pts, v_pts) -> np.ndarray:
    """Multilinear interpolation of a field at off-grid (x, v) points.

    x wraps on the torus; v is zero outside the box (points more than one
    cell beyond the outermost node evaluate to exactly zero). x_pts may be
    None for homogeneous fields. Shapes: x_pts (m, dim), v_pts (m, 3).
    """
    v_pts = np.asarray(v_pts, dtype=float)
    m = v_pts.shape[0]
    vel = field.velocity
    dim = field.space.dim
    n = vel.n

    # One zero cell of padding per velocity side absorbs boundary corners.
    padded = np.zeros((field.space.count, n + 2, n + 2, n + 2))
    padded[:, 1:-1, 1:-1, 1:-1] = field.values

    alive = np.ones(m, dtype=bool)
    v_lo, v_w = [], []
    for ax in range(3):
        idx = (v_pts[:, ax] + vel.radius) / vel.spacing - 0.5
        alive &= (idx >= -1.0) & (idx <= float(n))
        lo = np.clip(np.floor(idx).astype(int), -1, n - 1)
        v_lo.append(lo + 1)  # padded coordinates, corners in [0, n+1]
        v_w.append(idx - lo)

    x_lo, x_w = [], []
    if dim:
        x_pts = np.asarray(x_pts, dtype=float)
        nx = field.space.n
        for ax in range(dim):
            idx = x_pts[:, ax] / field.space.spacing - 0.5
            lo = np.floor(idx).astype(int)
            x_lo.append(np.mod(lo, nx))
            x_w.append(idx - lo)

    out = np.zeros(m)
    xi = np.zeros(m, dtype=int)
    for corner in range(2 ** (dim + 3)):
        bits = [(corner >> b) & 1 for b in range(dim + 3)]
        weight = np.ones(m)
        if dim:
            nx = field.space.n
            flat = np.zeros(m, dtype=int)
            for ax in range(dim):
                b = bits[ax]
                flat = flat * nx + np.mod(x_lo[ax] + b, nx)
                weight = weight * (x_w[ax] if b else 1.0 - x_w[ax])
            xi = flat
        iv = []
        for ax in range(3):
            b = bits[dim + ax]
            iv.append(v_lo[ax] + b)
            weight = weight * (v_w[ax] if b else 1.0 - v_w[ax])
        out += weight * padded[xi, iv[0], iv[1], iv[2]]
    out[~alive] = 0.0
    return out
