"""LANDAU01 binary container for phase fields and coefficient fields.

Layout: magic bytes "LANDAU01", then a header of six 64-bit little-endian
values (dim, n_x, n_v as integers; period, R_v, t as floats), then float64
little-endian payload, x-major then v-row-major. Coefficient containers
append an int64 block count and that many payload blocks (component order
axx, axy, axz, ayy, ayz, azz, bx, by, bz, c).
"""

from __future__ import annotations

import struct

import numpy as np

from .grids import PhaseField, SpatialGrid, VelocityGrid

MAGIC = b"LANDAU01"
_HEADER = struct.Struct("<qqqddd")

__all__ = ["SnapshotError", "write_field", "read_field", "write_coefficients", "read_coefficients", "MAGIC"]


class SnapshotError(ValueError):
    """Raised for malformed or truncated containers."""


def _header_bytes(space: SpatialGrid, velocity: VelocityGrid, t: float) -> bytes:
    return MAGIC + _HEADER.pack(space.dim, space.n, velocity.n, space.period, velocity.radius, t)


def _parse_header(buf: bytes):
    if buf[: len(MAGIC)] != MAGIC:
        raise SnapshotError(f"bad magic {buf[:len(MAGIC)]!r}")
    if len(buf) < len(MAGIC) + _HEADER.size:
        raise SnapshotError("truncated header")
    dim, n_x, n_v, period, r_v, t = _HEADER.unpack_from(buf, len(MAGIC))
    if dim not in (0, 1, 3):
        raise SnapshotError(f"dimension mismatch: dim={dim}")
    space = SpatialGrid(dim=dim, n=n_x, period=period)
    velocity = VelocityGrid(n=n_v, radius=r_v)
    return space, velocity, t, len(MAGIC) + _HEADER.size


def _payload(buf: bytes, offset: int, count: int) -> tuple[np.ndarray, int]:
    need = count * 8
    if len(buf) < offset + need:
        raise SnapshotError(f"truncated payload at offset {len(buf)} (expected {offset + need} bytes)")
    arr = np.frombuffer(buf, dtype="<f8", count=count, offset=offset).astype(np.float64)
    return arr, offset + need


def write_field(path, field: PhaseField) -> None:
    with open(path, "wb") as fh:
        fh.write(_header_bytes(field.space, field.velocity, field.t))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path) -> PhaseField:
    with open(path, "rb") as fh:
        buf = fh.read()
    space, velocity, t, offset = _parse_header(buf)
    count = space.count * velocity.n**3
    arr, offset = _payload(buf, offset, count)
    if len(buf) != offset:
        raise SnapshotError(f"trailing bytes after payload at offset {offset}")
    return PhaseField(t, space, velocity, arr.reshape(space.count, velocity.n, velocity.n, velocity.n))


def write_coefficients(path, coeffs) -> None:
    blocks = list(coeffs.a_components) + list(coeffs.b_components) + [coeffs.c]
    with open(path, "wb") as fh:
        fh.write(_header_bytes(coeffs.space, coeffs.velocity, coeffs.t))
        fh.write(struct.pack("<q", len(blocks)))
        for block in blocks:
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def read_coefficients(path):
    from .coefficients import CoefficientField

    with open(path, "rb") as fh:
        buf = fh.read()
    space, velocity, t, offset = _parse_header(buf)
    if len(buf) < offset + 8:
        raise SnapshotError("truncated block count")
    (n_blocks,) = struct.unpack_from("<q", buf, offset)
    offset += 8
    if n_blocks != 10:
        raise SnapshotError(f"coefficient container needs 10 blocks, found {n_blocks}")
    count = space.count * velocity.n**3
    shape = (space.count, velocity.n, velocity.n, velocity.n)
    blocks = []
    for _ in range(n_blocks):
        arr, offset = _payload(buf, offset, count)
        blocks.append(arr.reshape(shape))
    if len(buf) != offset:
        raise SnapshotError(f"trailing bytes after payload at offset {offset}")
    a = np.stack(blocks[:6], axis=1)
    b = np.stack(blocks[6:9], axis=1)
    return CoefficientField(t, space, velocity, a, b, blocks[9])
