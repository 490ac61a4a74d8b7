"""Discrete versions of the interior estimates for evolutionary p-Laplace solutions.

Every check takes a sampled space-time field and returns the two sides of
an identity or inequality as measured by quadrature.  Both sides of a
comparison always use the same node-centered stencils, so stencil error
cancels to leading order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .grid import (
    GridError,
    ScalarField,
    SpaceTimeGrid,
    SubCylinder,
    VectorField,
    divergence_field,
    gradient_field,
    integrate,
    lq_norm,
    region_weights,
    spatial_gradient,
    time_derivative,
    translate,
)
from .pflux import as_pexp, f_map, p_flux
from .reports import EstimateReport

__all__ = [
    "SpatialBump",
    "TimeCutoff",
    "CutoffPair",
    "MollifierSpec",
    "mollify",
    "steklov_average",
    "difference_quotient",
    "f_field",
    "df_field",
    "caccioppoli_difference_form",
    "estimate9_ratio",
    "dq_sobolev_characterization",
    "transition_bound_check",
    "verify_rule4",
    "weak_residual",
    "verify_theorem1",
    "energy_sup",
    "relative_defect",
]


def relative_defect(a: float, b: float, scale: float = 1.0) -> float:
    floor = 1e-14 * max(scale, 1e-300)
    return abs(a - b) / (abs(a) + abs(b) + floor)


# cutoffs ----------------------------------------------------------------------


@dataclass(frozen=True)
class SpatialBump:
    """zeta = 1 for |x - c| <= core, then (1 - s^2)^2 with s running 0 -> 1 up to ``radius``."""

    center: tuple[float, ...]
    radius: float
    core: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not 0 <= self.core < self.radius:
            raise ValueError("need 0 <= core < radius")

    def _s(self, grid: SpaceTimeGrid):
        if len(self.center) != grid.dim:
            raise ValueError("bump center dimension must match the grid")
        d = grid.points() - np.array(self.center)
        r = np.linalg.norm(d, axis=-1)
        s = np.clip((r - self.core) / (self.radius - self.core), 0.0, None)
        return d, r, s

    def values(self, grid: SpaceTimeGrid) -> np.ndarray:
        _, _, s = self._s(grid)
        return np.where(s < 1.0, (1.0 - s * s) ** 2, 0.0)

    def gradient(self, grid: SpaceTimeGrid) -> np.ndarray:
        d, r, s = self._s(grid)
        dz_ds = np.where(s < 1.0, -4.0 * s * (1.0 - s * s), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, d / r[..., None], 0.0)
        return (dz_ds / (self.radius - self.core))[..., None] * unit

    def fits(self, grid: SpaceTimeGrid, margin_nodes: int = 1) -> bool:
        pad = margin_nodes * grid.h
        return all(a + pad <= c - self.radius and c + self.radius <= b - pad
                   for c, (a, b) in zip(self.center, grid.extents))


@dataclass(frozen=True)
class TimeCutoff:
    """Piecewise linear eta: 0 at t0, 1 on [t0 + tau, t1 - beta], 0 at t1."""

    t0: float
    t1: float
    tau: float
    beta: float

    def __post_init__(self):
        if self.tau <= 0 or self.beta <= 0 or self.tau + self.beta > self.t1 - self.t0 + 1e-12:
            raise ValueError("need tau, beta > 0 and tau + beta <= t1 - t0")

    @classmethod
    def for_grid(cls, grid: SpaceTimeGrid, tau_frac: float = 0.1, beta_frac: float | None = None):
        T = grid.t1 - grid.t0
        beta_frac = tau_frac if beta_frac is None else beta_frac
        return cls(grid.t0, grid.t1, tau_frac * T, beta_frac * T)

    def values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        up = (t - self.t0) / self.tau
        down = (self.t1 - t) / self.beta
        return np.clip(np.minimum(up, down), 0.0, 1.0)

    def _slope(self, t: np.ndarray, right: bool) -> np.ndarray:
        a, b = self.t0 + self.tau, self.t1 - self.beta
        if right:
            rising = (t >= self.t0) & (t < a)
            falling = (t >= b) & (t < self.t1)
        else:
            rising = (t > self.t0) & (t <= a)
            falling = (t > b) & (t <= self.t1)
        return np.where(rising, 1.0 / self.tau, 0.0) - np.where(falling, 1.0 / self.beta, 0.0)

    def derivative(self, t) -> np.ndarray:
        """One-sided slopes at t0 and t1, the mean of both sides at the kinks."""
        t = np.asarray(t, dtype=float)
        right, left = self._slope(t, True), self._slope(t, False)
        out = 0.5 * (right + left)
        eps = 1e-12 * (self.t1 - self.t0)
        out = np.where(np.abs(t - self.t0) < eps, right, out)
        return np.where(np.abs(t - self.t1) < eps, left, out)

    def grid_derivative(self, t: np.ndarray) -> np.ndarray:
        """Central differences of eta on uniform nodes.

        Under the trapezoidal rule this weights each time interval by the
        exact increment of eta, so quadratures stay second order wherever
        the kinks fall.
        """
        t = np.asarray(t, dtype=float)
        return np.gradient(self.values(t), t[1] - t[0], edge_order=1)


@dataclass(frozen=True)
class CutoffPair:
    zeta: SpatialBump
    eta: TimeCutoff

    def phi(self, grid: SpaceTimeGrid):
        """phi = zeta(x) eta(t) with phi_t and grad phi, all of grid shape."""
        z = self.zeta.values(grid)
        gz = self.zeta.gradient(grid)
        e = self.eta.values(grid.t)
        de = self.eta.grid_derivative(grid.t)
        ex = (slice(None),) + (None,) * grid.dim
        return e[ex] * z, de[ex] * z, e[ex + (None,)] * gz


def _expand_time(grid: SpaceTimeGrid, arr: np.ndarray) -> np.ndarray:
    return arr[(slice(None),) + (None,) * grid.dim]


# smoothing ----------------------------------------------------------------------


@dataclass(frozen=True)
class MollifierSpec:
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def kernel(self, grid: SpaceTimeGrid) -> np.ndarray:
        """Normalized bump exp(-1/(1 - r^2/sigma^2)) on the space-time nodes within sigma."""
        kt = int(np.ceil(self.sigma / grid.dt))
        kx = int(np.ceil(self.sigma / grid.h))
        offs = [np.arange(-kt, kt + 1) * grid.dt] + [np.arange(-kx, kx + 1) * grid.h] * grid.dim
        r2 = sum(np.meshgrid(*[o * o for o in offs], indexing="ij")) / self.sigma ** 2
        with np.errstate(divide="ignore"):
            w = np.where(r2 < 1.0, np.exp(-1.0 / (1.0 - np.minimum(r2, 1 - 1e-300))), 0.0)
        w /= w.sum()
        # trim to the nonzero support so validity follows the true kernel reach
        nz = np.nonzero(w)
        return w[tuple(slice(i.min(), i.max() + 1) for i in nz)]


def _convolve_valid(f: ScalarField, kernel: np.ndarray) -> ScalarField:
    out = ndimage.correlate(f.values, kernel, mode="nearest")
    footprint = kernel > 0
    valid = ndimage.minimum_filter(f.mask.astype(np.uint8), footprint=footprint,
                                   mode="constant", cval=0).astype(bool)
    return ScalarField(f.grid, np.where(valid, out, 0.0), valid)


def mollify(f: ScalarField, spec: MollifierSpec) -> ScalarField:
    """Space-time convolution with a compactly supported bump; a no-op below grid scale."""
    return _convolve_valid(f, spec.kernel(f.grid))


def _hat_integral(a: float, b: float, j: int) -> float:
    def H(x):
        x = x - j
        if x <= -1:
            return 0.0
        if x <= 0:
            return 0.5 * (x + 1) ** 2
        if x <= 1:
            return 1.0 - 0.5 * (1 - x) ** 2
        return 1.0
    return H(b) - H(a)


def steklov_average(f: ScalarField, sigma_t: float) -> ScalarField:
    """Centered window average (1/s) * integral over [t - s/2, t + s/2] of the linear interpolant."""
    g = f.grid
    if sigma_t < g.dt * (1 - 1e-12):
        raise ValueError("sigma_t must be at least one time step")
    w = 0.5 * sigma_t / g.dt
    k = int(np.ceil(w - 1e-12))
    taps = np.array([_hat_integral(-w, w, j) for j in range(-k - 1, k + 2)]) / (2.0 * w)
    taps = taps[np.flatnonzero(taps > 1e-15).min():np.flatnonzero(taps > 1e-15).max() + 1]
    kernel = taps.reshape((-1,) + (1,) * g.dim)
    return _convolve_valid(f, kernel)


# fields --------------------------------------------------------------------------


def difference_quotient(u: ScalarField, offset_steps: int, axis: int = 0) -> ScalarField:
    g = u.grid
    if abs(offset_steps) < 1:
        raise GridError("offset must be at least one grid step")
    off = [0] * g.dim
    off[axis] = offset_steps
    v = translate(u, off)
    return ScalarField(g, (v.values - u.values) / (offset_steps * g.h), v.valid & u.mask)


def f_field(u: ScalarField, p) -> VectorField:
    as_pexp(p).require_degenerate()
    gu = gradient_field(u)
    return VectorField(u.grid, f_map(gu.values, p), gu.valid)


def df_field(u: ScalarField, p) -> np.ndarray:
    """Samples of DF with DF[..., i, j] = d/dx_j F_i, grid shape + (dim, dim)."""
    g = u.grid
    F = f_field(u, p).values
    return np.stack([spatial_gradient(F[..., i], g.h, g.dim) for i in range(g.dim)], axis=-2)


def _flux_field(u: ScalarField, p) -> VectorField:
    gu = gradient_field(u)
    return VectorField(u.grid, p_flux(gu.values, p), gu.valid)


def _params(p, grid: SpaceTimeGrid, cutoffs: CutoffPair | None = None, **kw):
    out = {"p": as_pexp(p).p, "h": grid.h, "dt": grid.dt}
    if cutoffs is not None:
        out.update(tau=cutoffs.eta.tau, beta=cutoffs.eta.beta, zeta_radius=cutoffs.zeta.radius,
                   zeta_core=cutoffs.zeta.core, zeta_center=list(cutoffs.zeta.center))
    out.update(kw)
    return out


# estimates -----------------------------------------------------------------------


def caccioppoli_difference_form(u: ScalarField, p, offset, cutoffs: CutoffPair) -> EstimateReport:
    """Both sides of the energy identity for w = u(x + h) - u(x), each divided by |h|^2.

    lhs  = int eta zeta^p <V(grad v) - V(grad u), grad v - grad u>
    rhs  = -p int eta zeta^(p-1) w <V(grad v) - V(grad u), grad zeta>
           + 1/2 int eta' zeta^p w^2
    """
    p = as_pexp(p).require_degenerate()
    g = u.grid
    offs = (offset,) if np.isscalar(offset) else tuple(offset)
    hd2 = float(np.sum(np.square(offs))) * g.h ** 2
    if hd2 == 0:
        raise GridError("offset must be nonzero")
    v = translate(u, offs)
    gu, gv = gradient_field(u), gradient_field(v)
    valid = gv.mask & gu.mask
    zeta = cutoffs.zeta.values(g)
    if np.any((zeta > 0) & ~valid[0]):
        raise GridError("cutoff support leaks outside the valid translated region")
    dflux = p_flux(gv.values, p) - p_flux(gu.values, p)
    dgrad = gv.values - gu.values
    w = v.values - u.values
    eta = _expand_time(g, cutoffs.eta.values(g.t))
    deta = _expand_time(g, cutoffs.eta.grid_derivative(g.t))
    gz = cutoffs.zeta.gradient(g)
    zp = zeta ** p
    zp1 = zeta ** (p - 1.0)

    def I(arr):
        return integrate(np.where(valid, arr, 0.0), grid=g) / hd2

    lhs = I(eta * zp * np.sum(dflux * dgrad, axis=-1))
    t_zeta = I(-p * eta * zp1 * w * np.sum(dflux * gz, axis=-1))
    t_eta = I(0.5 * deta * zp * w * w)
    rhs = t_zeta + t_eta
    scale = abs(lhs) + abs(t_zeta) + abs(t_eta)
    return EstimateReport(
        name="caccioppoli", lhs=lhs, rhs=rhs, grid_tag=g.tag(),
        params=_params(p, g, cutoffs, offset=list(offs)),
        extra={"zeta_term": t_zeta, "eta_term": t_eta,
               "rel_defect": relative_defect(lhs, rhs, scale)})


def estimate9_ratio(u: ScalarField, p, cutoffs: CutoffPair, tau: float | None = None) -> EstimateReport:
    """lhs = int_tau^T int zeta^p |DF|^2;  rhs = (1/tau) int_0^tau int zeta^p |grad u|^2
    + int int (zeta^p + |grad zeta|^p) |grad u|^p.  The ratio is the empirical constant."""
    p = as_pexp(p).require_degenerate(strict=True)
    g = u.grid
    tau = cutoffs.eta.tau if tau is None else tau
    T = g.t1 - g.t0
    if not 0 < tau < T:
        raise ValueError(f"tau must lie in (0, {T})")
    zp = cutoffs.zeta.values(g) ** p
    gzp = np.linalg.norm(cutoffs.zeta.gradient(g), axis=-1) ** p
    gu = gradient_field(u).values
    gn2 = np.sum(gu * gu, axis=-1)
    DF = df_field(u, p)
    df2 = np.sum(DF * DF, axis=(-2, -1))
    late = SubCylinder(0.0, tau, 0.0)
    early = SubCylinder(0.0, 0.0, T - tau)
    lhs = integrate(zp * df2, late, g)
    early_term = integrate(zp * gn2, early, g) / tau
    bulk_term = integrate((zp + gzp) * gn2 ** (0.5 * p), grid=g)
    return EstimateReport(
        name="estimate9", lhs=lhs, rhs=early_term + bulk_term, grid_tag=g.tag(),
        params=_params(p, g, cutoffs, tau_used=tau),
        extra={"early_term": early_term, "bulk_term": bulk_term})


def dq_sobolev_characterization(u: ScalarField, p, offsets: Sequence[int],
                                cutoffs: CutoffPair) -> EstimateReport:
    """Integrated squared difference quotients of F against the integrated |DF|^2.

    lhs is the largest quotient integral over the offsets, rhs the DF integral.
    """
    p = as_pexp(p).require_degenerate()
    offsets = list(offsets)
    if any(b >= a for a, b in zip(offsets, offsets[1:])) or min(offsets) < 1:
        raise ValueError("offsets must be positive and strictly decreasing")
    g = u.grid
    F = f_field(u, p)
    weight = _expand_time(g, cutoffs.eta.values(g.t)) * cutoffs.zeta.values(g) ** p
    DF = df_field(u, p)
    d_int = integrate(weight * np.sum(DF * DF, axis=(-2, -1)), grid=g)
    quot = {}
    for k in offsets:
        total = 0.0
        for j in range(g.dim):
            comps = []
            valid = np.ones(g.shape, dtype=bool)
            for i in range(g.dim):
                q = difference_quotient(ScalarField(g, F.values[..., i]), k, axis=j)
                comps.append(q.values)
                valid &= q.mask
            if np.any((weight > 0) & ~valid):
                raise GridError(f"offset {k} pushes the cutoff support outside the grid")
            Q = np.stack(comps, axis=-1)
            total += integrate(np.where(valid, weight * np.sum(Q * Q, axis=-1), 0.0), grid=g)
        quot[f"offset_{k}"] = total
    return EstimateReport(
        name="dq_sobolev", lhs=max(quot.values()), rhs=d_int, grid_tag=g.tag(),
        params=_params(p, g, cutoffs, offsets=offsets), extra=quot)


def transition_bound_check(u: ScalarField, p, region: SubCylinder | None = None) -> EstimateReport:
    """Node-wise |d_j V| <= 2(1 - 1/p) |F|^((p-2)/p) |d_j F| with V = |F|^(1-2/p) F.

    The central difference d_j V equals a secant of V between the two
    stencil neighbours, so the stencil error is bounded by replacing |F|
    at the node with the largest |F| over the stencil; that excess is the
    discretization tolerance.  lhs/rhs report the worst node.
    """
    p = as_pexp(p).require_degenerate()
    g = u.grid
    alpha = (p - 2.0) / p
    F = f_field(u, p).values
    V = p_flux(gradient_field(u).values, p)
    Fn = np.linalg.norm(F, axis=-1)
    region = region or SubCylinder()
    sel = region.node_ranges(g)
    inner = np.ones(g.shape, dtype=bool)
    inner &= _expand_time(g, sel[0])
    for ax in range(g.dim):
        s = sel[ax + 1].copy()
        s[0] = s[-1] = False
        shape = [1] * (g.dim + 1)
        shape[ax + 1] = -1
        inner &= s.reshape(shape)
    viol = raw = count = 0
    worst = (0.0, 0.0, -np.inf)
    for j in range(g.dim):
        ax = 1 + j
        dV = np.gradient(V, g.h, axis=ax)
        dF = np.gradient(F, g.h, axis=ax)
        lhs = np.linalg.norm(dV, axis=-1)
        dFn = np.linalg.norm(dF, axis=-1)
        rhs = (1.0 + alpha) * Fn ** alpha * dFn
        fmax = np.maximum(np.maximum(np.roll(Fn, 1, axis=ax), np.roll(Fn, -1, axis=ax)), Fn)
        tol = (1.0 + alpha) * dFn * (fmax ** alpha - Fn ** alpha) + 1e-12 * (lhs + rhs) + 1e-300
        excess = np.where(inner, lhs - rhs - tol, -np.inf)
        viol += int(np.sum(excess > 0))
        raw += int(np.sum(inner & (lhs > rhs * (1 + 1e-12))))
        count += int(inner.sum())
        k = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[k] > worst[2]:
            worst = (float(lhs[k]), float(rhs[k]), float(excess[k]))
    return EstimateReport(
        name="transition", lhs=worst[0], rhs=worst[1], grid_tag=g.tag(), params=_params(p, g),
        extra={"violation_fraction": viol / max(count, 1), "raw_violation_fraction": raw / max(count, 1),
               "nodes": float(count)})


def _check_support(grid: SpaceTimeGrid, tests: Sequence[CutoffPair]) -> None:
    for c in tests:
        if not c.zeta.fits(grid, margin_nodes=2):
            raise GridError(f"test function support {c.zeta} is not interior to the grid")
        if abs(c.eta.t0 - grid.t0) > 1e-12 or abs(c.eta.t1 - grid.t1) > 1e-12:
            raise GridError("temporal cutoff must span the grid time interval")


def verify_rule4(u: ScalarField, p, test_functions: Sequence[CutoffPair]) -> EstimateReport:
    """int u phi_t  against  -int phi div(V(grad u)) for phi = zeta(x) eta(t)."""
    p = as_pexp(p).require_degenerate()
    g = u.grid
    _check_support(g, test_functions)
    div = divergence_field(_flux_field(u, p)).values
    defects, worst = [], None
    for c in test_functions:
        phi, phi_t, _ = c.phi(g)
        lhs = integrate(u.values * phi_t, grid=g)
        rhs = -integrate(phi * div, grid=g)
        d = relative_defect(lhs, rhs, integrate(np.abs(u.values * phi_t), grid=g))
        defects.append(d)
        if worst is None or d >= worst[2]:
            worst = (lhs, rhs, d)
    return EstimateReport(
        name="rule4", lhs=worst[0], rhs=worst[1], grid_tag=g.tag(), params=_params(p, g),
        extra={"rel_defect": max(defects), **{f"defect_{i}": d for i, d in enumerate(defects)}})


def weak_residual(u: ScalarField, p, test_functions: Sequence[CutoffPair]) -> float:
    """max over phi of |int (-u phi_t + <V(grad u), grad phi>)| / int (|phi_t| + |grad phi|)."""
    p = as_pexp(p).require_degenerate()
    g = u.grid
    _check_support(g, test_functions)
    V = _flux_field(u, p).values
    worst = 0.0
    for c in test_functions:
        _, phi_t, gphi = c.phi(g)
        r = integrate(-u.values * phi_t + np.sum(V * gphi, axis=-1), grid=g)
        norm = integrate(np.abs(phi_t) + np.linalg.norm(gphi, axis=-1), grid=g)
        worst = max(worst, abs(r) / norm)
    return worst


def verify_theorem1(u: ScalarField, p, region: SubCylinder) -> EstimateReport:
    """L^q norms (q = p/(p-1)) of u_t and of div(V(grad u)) on an interior subcylinder."""
    pe = as_pexp(p)
    p = pe.require_degenerate()
    g = u.grid
    if not region.is_interior(g) or region.tau_lo < g.dt or region.tau_hi < g.dt:
        raise GridError("theorem check needs a strictly interior region")
    region.validate(g)
    q = pe.conjugate
    ut = time_derivative(u)
    div = divergence_field(_flux_field(u, p))
    lhs = lq_norm(ut, q, region)
    rhs = lq_norm(div, q, region)
    diff = lq_norm(ut - div, q, region)
    return EstimateReport(
        name="theorem1", lhs=lhs, rhs=rhs, grid_tag=g.tag(),
        params=_params(p, g, q=q, margin=region.margin, tau_lo=region.tau_lo, tau_hi=region.tau_hi),
        extra={"rel_diff": abs(lhs - rhs) / max(lhs, rhs) if max(lhs, rhs) > 0 else 0.0,
               "pointwise_rel_diff": diff / lhs if lhs > 0 else 0.0,
               "ut_l2": lq_norm(ut, 2.0, region), "div_l2": lq_norm(div, 2.0, region)})


def energy_sup(u: ScalarField, p, zeta: SpatialBump) -> float:
    """max over time levels of int zeta^p |grad u|^2 dx."""
    p = as_pexp(p).p
    g = u.grid
    w = region_weights(g, spatial_only=True) * zeta.values(g) ** p
    gu = gradient_field(u).values
    return float(np.max(np.sum(w * np.sum(gu * gu, axis=-1), axis=tuple(range(1, g.dim + 1)))))
