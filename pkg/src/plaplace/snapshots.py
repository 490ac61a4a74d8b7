"""Flat binary snapshots: a fixed header followed by little-endian float64 values."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import ScalarField, SpaceTimeGrid

MAGIC = b"PLSNAP01"
# magic, dim, nx, ny, slices, level, x0, x1, y0, y1, t0, t1
_HEADER = struct.Struct("<8s5i6d")


def write_snapshot(path: str | Path, u: ScalarField, level: int = 0) -> Path:
    g = u.grid
    ny = g.ny if g.dim == 2 else 0
    head = _HEADER.pack(MAGIC, g.dim, g.nx, ny, g.nt + 1, level,
                        g.x0, g.x1, g.y0 if g.dim == 2 else 0.0, g.y1 if g.dim == 2 else 0.0, g.t0, g.t1)
    path = Path(path)
    path.write_bytes(head + np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    return path


def read_snapshot(path: str | Path) -> tuple[dict, ScalarField]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("snapshot too short")
    magic, dim, nx, ny, slices, level, x0, x1, y0, y1, t0, t1 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not a snapshot file")
    if dim == 1:
        grid = SpaceTimeGrid(1, nx, slices - 1, x0, x1, t0, t1)
    else:
        grid = SpaceTimeGrid(2, nx, slices - 1, x0, x1, t0, t1, ny, y0, y1)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != np.prod(grid.shape):
        raise ValueError("snapshot payload does not match its header")
    header = {"dim": dim, "nx": nx, "ny": ny, "slices": slices, "level": level,
              "extents": [x0, x1, y0, y1], "time": [t0, t1]}
    return header, ScalarField(grid, data.reshape(grid.shape).astype(float))
