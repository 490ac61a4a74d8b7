"""Uniform space-time grids, sampled fields and the discrete operators on them.

Fields are stored time-major: a scalar field on a 1D grid has shape
``(nt + 1, nx + 1)``, on a 2D grid ``(nt + 1, nx + 1, ny + 1)``.  Vector
fields carry one trailing component axis.  Every field has an optional
validity mask; invalid nodes (after a translation, a time difference or a
convolution) are excluded from region integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "GridError",
    "SpaceTimeGrid",
    "ScalarField",
    "VectorField",
    "SubCylinder",
    "spatial_gradient",
    "spatial_divergence",
    "gradient",
    "divergence",
    "gradient_field",
    "divergence_field",
    "time_derivative",
    "region_weights",
    "integrate",
    "lq_norm",
    "translate",
]


class GridError(ValueError):
    """Invalid grid, field, index or region."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Tensor grid on ``[x0, x1] (x [y0, y1]) x [t0, t1]`` with square cells."""

    dim: int
    nx: int
    nt: int
    x0: float = 0.0
    x1: float = 1.0
    t0: float = 0.0
    t1: float = 1.0
    ny: int | None = None
    y0: float = 0.0
    y1: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if self.nx < 4 or self.nt < 4:
            raise GridError("nx and nt must be at least 4")
        if not (self.x1 > self.x0 and self.t1 > self.t0):
            raise GridError("extents must be increasing")
        if self.dim == 2:
            if self.ny is None:
                object.__setattr__(self, "ny", self.nx)
            if self.ny < 4 or not self.y1 > self.y0:
                raise GridError("ny must be at least 4 and y extent increasing")
            hy = (self.y1 - self.y0) / self.ny
            if not np.isclose(hy, self.h, rtol=1e-12, atol=0.0):
                raise GridError(f"cells must be square: hx={self.h}, hy={hy}")
        elif self.ny is not None:
            raise GridError("ny given for a 1D grid")

    @property
    def h(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.nt

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        if self.dim == 1:
            return (self.nx + 1,)
        return (self.nx + 1, self.ny + 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nt + 1,) + self.spatial_shape

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx + 1)

    @property
    def y(self) -> np.ndarray:
        if self.dim != 2:
            raise GridError("1D grid has no y axis")
        return self.y0 + self.h * np.arange(self.ny + 1)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.nt + 1)

    @property
    def axes(self) -> list[np.ndarray]:
        return [self.x] if self.dim == 1 else [self.x, self.y]

    @property
    def extents(self) -> list[tuple[float, float]]:
        ext = [(self.x0, self.x1)]
        if self.dim == 2:
            ext.append((self.y0, self.y1))
        return ext

    def points(self) -> np.ndarray:
        """Spatial node coordinates, shape ``spatial_shape + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.spatial_shape, dtype=bool)
        mask[0] = mask[-1] = True
        if self.dim == 2:
            mask[:, 0] = mask[:, -1] = True
        return mask

    def refined(self, factor: int = 2, time_factor: int | None = None) -> SpaceTimeGrid:
        tf = factor if time_factor is None else time_factor
        ny = None if self.ny is None else self.ny * factor
        return SpaceTimeGrid(self.dim, self.nx * factor, self.nt * tf, self.x0, self.x1,
                             self.t0, self.t1, ny, self.y0, self.y1)

    def with_nodes(self, nx: int, nt: int) -> SpaceTimeGrid:
        ny = None if self.dim == 1 else round(nx * (self.y1 - self.y0) / (self.x1 - self.x0))
        return SpaceTimeGrid(self.dim, nx, nt, self.x0, self.x1, self.t0, self.t1,
                             ny, self.y0, self.y1)

    def tag(self) -> str:
        sp = f"{self.nx}" if self.dim == 1 else f"{self.nx}x{self.ny}"
        return f"{sp}/{self.nt}"

    def check_time_index(self, t_index: int) -> int:
        if not -self.nt - 1 <= t_index <= self.nt:
            raise GridError(f"time index {t_index} out of range for nt={self.nt}")
        return t_index % (self.nt + 1)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScalarField:
    grid: SpaceTimeGrid
    values: np.ndarray
    valid: np.ndarray | None = field(default=None)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != self.grid.shape:
            raise GridError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        mask = self.valid
        if mask is not None:
            mask = np.array(mask, dtype=bool)
            if mask.shape != vals.shape:
                raise GridError("validity mask shape mismatch")
            mask.setflags(write=False)
        checked = vals if mask is None else vals[mask]
        if not np.all(np.isfinite(checked)):
            raise GridError("field contains non-finite values")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", mask)

    @property
    def mask(self) -> np.ndarray:
        return np.ones(self.grid.shape, dtype=bool) if self.valid is None else self.valid

    def slice(self, t_index: int) -> np.ndarray:
        return self.values[self.grid.check_time_index(t_index)]

    def with_values(self, values, valid=None) -> ScalarField:
        return ScalarField(self.grid, values, valid)

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn) -> ScalarField:
        """Sample ``fn(*spatial_coords, t)`` on every node."""
        coords = np.meshgrid(grid.t, *grid.axes, indexing="ij")
        return cls(grid, np.broadcast_to(fn(*coords[1:], coords[0]), grid.shape))

    def __add__(self, other: ScalarField) -> ScalarField:
        return ScalarField(self.grid, self.values + other.values, _and(self.valid, other.valid))

    def __sub__(self, other: ScalarField) -> ScalarField:
        return ScalarField(self.grid, self.values - other.values, _and(self.valid, other.valid))

    def __mul__(self, s: float) -> ScalarField:
        return ScalarField(self.grid, s * self.values, self.valid)

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    grid: SpaceTimeGrid
    values: np.ndarray
    valid: np.ndarray | None = field(default=None)

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != self.grid.shape + (self.grid.dim,):
            raise GridError(f"vector values shape {vals.shape} does not match grid")
        mask = self.valid
        if mask is not None:
            mask = np.array(mask, dtype=bool)
            if mask.shape != self.grid.shape:
                raise GridError("validity mask shape mismatch")
            mask.setflags(write=False)
        checked = vals if mask is None else vals[mask]
        if not np.all(np.isfinite(checked)):
            raise GridError("field contains non-finite values")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", mask)

    @property
    def mask(self) -> np.ndarray:
        return np.ones(self.grid.shape, dtype=bool) if self.valid is None else self.valid

    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)


def _and(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a & b


@dataclass(frozen=True)
class SubCylinder:
    """Interior region: shrink each spatial side by ``margin`` and time by ``(tau_lo, tau_hi)``."""

    margin: float = 0.0
    tau_lo: float = 0.0
    tau_hi: float = 0.0

    def node_ranges(self, grid: SpaceTimeGrid) -> list[np.ndarray]:
        """Boolean selectors for the time axis followed by each spatial axis."""
        eps_t = 1e-9 * grid.dt
        eps_x = 1e-9 * grid.h
        t = grid.t
        sel = [(t >= grid.t0 + self.tau_lo - eps_t) & (t <= grid.t1 - self.tau_hi + eps_t)]
        for ax, (a, b) in zip(grid.axes, grid.extents):
            sel.append((ax >= a + self.margin - eps_x) & (ax <= b - self.margin + eps_x))
        return sel

    def validate(self, grid: SpaceTimeGrid, min_nodes: int = 2) -> None:
        if self.margin < 0 or self.tau_lo < 0 or self.tau_hi < 0:
            raise GridError("region margins must be nonnegative")
        for s in self.node_ranges(grid):
            if s.sum() < min_nodes:
                raise GridError(f"region {self} is empty on grid {grid.tag()}")

    def is_interior(self, grid: SpaceTimeGrid) -> bool:
        return self.margin > 0 and self.tau_lo > 0 and self.tau_hi > 0


def spatial_gradient(values: np.ndarray, h: float, dim: int) -> np.ndarray:
    """Central differences inside, second-order one-sided at the boundary.

    ``values`` has ``dim`` trailing spatial axes; the result gets a trailing
    component axis.
    """
    nd = values.ndim
    axes = tuple(range(nd - dim, nd))
    g = np.gradient(values, h, axis=axes, edge_order=2)
    if dim == 1:
        g = [g]
    return np.stack(g, axis=-1)


def spatial_divergence(values: np.ndarray, h: float, dim: int) -> np.ndarray:
    nd = values.ndim - 1
    out = np.zeros(values.shape[:-1])
    for j in range(dim):
        out += np.gradient(values[..., j], h, axis=nd - dim + j, edge_order=2)
    return out


def gradient(u: ScalarField, t_index: int) -> np.ndarray:
    g = u.grid
    return spatial_gradient(u.values[g.check_time_index(t_index)], g.h, g.dim)


def divergence(w: VectorField, t_index: int) -> np.ndarray:
    g = w.grid
    return spatial_divergence(w.values[g.check_time_index(t_index)], g.h, g.dim)


def _stencil_mask(mask: np.ndarray | None, dim: int) -> np.ndarray | None:
    """A node stays valid only if its whole 3-point stencil was valid."""
    if mask is None:
        return None
    out = mask.copy()
    nd = mask.ndim
    for ax in range(nd - dim, nd):
        m = np.moveaxis(out, ax, 0)
        src = np.moveaxis(mask, ax, 0)
        m[1:-1] &= src[:-2] & src[2:]
        m[0] &= src[1] & src[2]
        m[-1] &= src[-2] & src[-3]
    return out


def gradient_field(u: ScalarField) -> VectorField:
    g = u.grid
    return VectorField(g, spatial_gradient(u.values, g.h, g.dim), _stencil_mask(u.valid, g.dim))


def divergence_field(w: VectorField) -> ScalarField:
    g = w.grid
    return ScalarField(g, spatial_divergence(w.values, g.h, g.dim), _stencil_mask(w.valid, g.dim))


def time_derivative(u: ScalarField) -> ScalarField:
    """Central time differences; the first and last levels are flagged invalid."""
    g = u.grid
    if g.nt < 2:
        raise GridError("time derivative needs at least 3 time levels")
    vals = np.zeros(g.shape)
    vals[1:-1] = (u.values[2:] - u.values[:-2]) / (2.0 * g.dt)
    valid = np.zeros(g.shape, dtype=bool)
    valid[1:-1] = True
    if u.valid is not None:
        valid[1:-1] &= u.valid[2:] & u.valid[:-2]
    return ScalarField(g, vals, valid)


def _trapezoid_1d(sel: np.ndarray, step: float) -> np.ndarray:
    w = np.zeros(sel.shape)
    idx = np.flatnonzero(sel)
    if idx.size < 2:
        raise GridError("region has fewer than two nodes along an axis")
    w[idx[0]:idx[-1] + 1] = step
    w[idx[0]] = w[idx[-1]] = 0.5 * step
    return w


def region_weights(grid: SpaceTimeGrid, region: SubCylinder | None = None,
                   spatial_only: bool = False) -> np.ndarray:
    """Tensor trapezoidal weights, zero outside the region."""
    region = region or SubCylinder()
    sels = region.node_ranges(grid)
    steps = [grid.dt] + [grid.h] * grid.dim
    if spatial_only:
        sels, steps = sels[1:], steps[1:]
    ws = [_trapezoid_1d(s, st) for s, st in zip(sels, steps)]
    out = ws[0]
    for w in ws[1:]:
        out = np.multiply.outer(out, w)
    return out


def _samples(f) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(f, (ScalarField, VectorField)):
        return f.values, f.valid
    return np.asarray(f, dtype=float), None


def integrate(f, region: SubCylinder | None = None, grid: SpaceTimeGrid | None = None,
              valid: np.ndarray | None = None) -> float:
    """Trapezoidal space-time integral of ``f`` over ``region``.

    ``f`` is a ScalarField or an array of the grid shape (then ``grid`` is
    required).  Invalid nodes contribute nothing.
    """
    vals, mask = _samples(f)
    grid = f.grid if isinstance(f, ScalarField) else grid
    if grid is None:
        raise GridError("grid required for raw sample arrays")
    if vals.shape != grid.shape:
        raise GridError(f"samples shape {vals.shape} != grid shape {grid.shape}")
    w = region_weights(grid, region)
    mask = _and(mask, valid)
    if mask is not None:
        w = np.where(mask, w, 0.0)
        if not np.any(w > 0):
            raise GridError("region contains no valid nodes")
    return float(np.sum(w * np.where(w > 0, vals, 0.0)))


def lq_norm(f, q: float, region: SubCylinder | None = None, grid: SpaceTimeGrid | None = None,
            valid: np.ndarray | None = None) -> float:
    if q < 1:
        raise GridError(f"lq_norm needs q >= 1, got {q}")
    vals, mask = _samples(f)
    grid = f.grid if isinstance(f, ScalarField) else grid
    return integrate(np.abs(vals) ** q, region, grid, _and(mask, valid)) ** (1.0 / q)


def translate(u: ScalarField, offset: int | Sequence[int]) -> ScalarField:
    """``v(x) = u(x + offset * h)`` by exact index shift; unreachable nodes are invalid."""
    g = u.grid
    offs = (offset,) if np.isscalar(offset) else tuple(offset)
    if len(offs) != g.dim:
        raise GridError(f"offset needs {g.dim} components")
    vals = np.zeros(g.shape)
    valid = np.zeros(g.shape, dtype=bool)
    src = [slice(None)]
    dst = [slice(None)]
    for k, n in zip(offs, g.spatial_shape):
        k = int(k)
        if abs(k) >= n:
            raise GridError(f"offset {k} exceeds grid extent {n}")
        src.append(slice(max(k, 0), n + min(k, 0)))
        dst.append(slice(max(-k, 0), n - max(k, 0)))
    vals[tuple(dst)] = u.values[tuple(src)]
    valid[tuple(dst)] = u.mask[tuple(src)]
    return ScalarField(g, vals, valid)
