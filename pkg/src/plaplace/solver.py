"""Time stepping for u_t = div(|grad u|^(p-2) grad u) with Dirichlet data.

The spatial operator is the gradient of a discrete energy.  Gradients live
on cell faces (staggered), and the nodal divergence is the weighted
adjoint of the face gradient:

    div_h(u) = -(1/h^d) G^T W flux(G u)

In 1D this is the usual compact flux difference.  In 2D each face also
carries the transverse derivative, averaged from its neighbours.  Because
the operator is a gradient, the Newton Jacobian I + dt G^T W K G is
symmetric positive definite, which is what lets us use preconditioned CG.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import LinearOperator, cg

from .grid import ScalarField, SpaceTimeGrid
from .pflux import FluxMatrix, PExponent, RegimeError, as_pexp

log = logging.getLogger(__name__)

__all__ = [
    "Scheme",
    "SolveConfig",
    "Problem",
    "SolverError",
    "CFLViolation",
    "NonlinearConvergenceError",
    "StaggeredOperator",
    "staggered_operator",
    "admissible_dt",
    "step_explicit",
    "step_implicit",
    "solve",
]


class SolverError(RuntimeError):
    pass


class CFLViolation(SolverError):
    def __init__(self, dt: float, admissible: float):
        super().__init__(f"explicit step dt={dt:.3e} exceeds admissible dt={admissible:.3e}")
        self.dt = dt
        self.admissible = admissible


class NonlinearConvergenceError(SolverError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"implicit step did not converge in {iterations} iterations "
                         f"(residual {residual:.3e}); try a smaller dt")
        self.residual = residual
        self.iterations = iterations


class Scheme(str, enum.Enum):
    EXPLICIT = "explicit"
    IMPLICIT_EULER = "implicit"


@dataclass(frozen=True)
class SolveConfig:
    scheme: Scheme = Scheme.EXPLICIT
    nonlinear_tol: float = 1e-10
    max_nonlinear_iters: int = 50
    eps_reg: float = 0.0
    cfl_safety: float = 0.5
    # the Newton Jacobian always uses a regularized flux; this is its floor
    jacobian_eps: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.nonlinear_tol <= 0:
            raise ValueError("nonlinear_tol must be positive")
        if self.max_nonlinear_iters < 1:
            raise ValueError("max_nonlinear_iters must be at least 1")
        if self.eps_reg < 0:
            raise ValueError("eps_reg must be nonnegative")
        if not 0 < self.cfl_safety < 1:
            raise ValueError("cfl_safety must lie in (0, 1)")


@dataclass(frozen=True)
class Problem:
    """Initial/boundary value problem on ``grid``.

    ``boundary`` and ``source`` are full space-time sample arrays (only the
    boundary nodes of ``boundary`` are read); both are interpolated linearly
    in time between grid levels.  Without ``boundary`` the initial boundary
    values are held fixed.
    """

    grid: SpaceTimeGrid
    p: PExponent
    initial: np.ndarray
    boundary: np.ndarray | None = None
    flux_matrix: FluxMatrix | None = None
    source: np.ndarray | None = None
    bc_tol: float = 1e-8

    def __post_init__(self):
        g = self.grid
        object.__setattr__(self, "p", as_pexp(self.p))
        init = np.array(self.initial, dtype=float)
        if init.shape != g.spatial_shape or not np.all(np.isfinite(init)):
            raise ValueError("initial data must be finite with the grid's spatial shape")
        object.__setattr__(self, "initial", init)
        if self.boundary is not None:
            bnd = np.array(self.boundary, dtype=float)
            if bnd.shape != g.shape:
                raise ValueError("boundary data must have the full grid shape")
            bm = g.boundary_mask()
            if not np.all(np.isfinite(bnd[:, bm])):
                raise ValueError("boundary data must be finite")
            mismatch = np.max(np.abs(bnd[0][bm] - init[bm]))
            if mismatch > self.bc_tol:
                raise ValueError(f"boundary data disagree with initial data by {mismatch:.3e}")
            object.__setattr__(self, "boundary", bnd)
        if self.source is not None:
            src = np.array(self.source, dtype=float)
            if src.shape != g.shape or not np.all(np.isfinite(src)):
                raise ValueError("source must be finite with the full grid shape")
            object.__setattr__(self, "source", src)
        if self.flux_matrix is None:
            object.__setattr__(self, "flux_matrix", FluxMatrix.identity(g.dim))
        elif self.flux_matrix.dim != g.dim:
            raise ValueError("flux matrix dimension must match the grid")

    def _interp(self, arr: np.ndarray, t: float) -> np.ndarray:
        g = self.grid
        s = min(max((t - g.t0) / g.dt, 0.0), float(g.nt))
        k = min(int(math.floor(s)), g.nt - 1)
        w = s - k
        if w == 0.0:
            return arr[k]
        return (1.0 - w) * arr[k] + w * arr[k + 1]

    def boundary_at(self, t: float) -> np.ndarray:
        if self.boundary is None:
            return self.initial
        return self._interp(self.boundary, t)

    def source_at(self, t: float) -> np.ndarray | None:
        return None if self.source is None else self._interp(self.source, t)


class StaggeredOperator:
    """Face gradients G (one sparse matrix per component) and quadrature weights."""

    def __init__(self, grid: SpaceTimeGrid):
        self.dim = grid.dim
        self.h = grid.h
        self.shape = grid.spatial_shape
        self.n_nodes = int(np.prod(self.shape))
        self.mass = grid.h ** grid.dim
        bm = grid.boundary_mask().ravel()
        self.boundary = np.flatnonzero(bm)
        self.interior = np.flatnonzero(~bm)
        if grid.dim == 1:
            self._build_1d(grid.nx)
        else:
            self._build_2d(grid.nx, grid.ny)
        self.GT = [g.T.tocsr() for g in self.G]
        self._GG = {(c, d): self.G[c].multiply(self.G[d]).T.tocsr()
                    for c in range(self.dim) for d in range(self.dim)}

    def _build_1d(self, nx: int):
        h = self.h
        i = np.arange(nx)
        rows = np.concatenate([i, i])
        cols = np.concatenate([i, i + 1])
        vals = np.concatenate([-np.ones(nx), np.ones(nx)]) / h
        self.G = [sps.csr_matrix((vals, (rows, cols)), shape=(nx, nx + 1))]
        self.weights = np.full(nx, h)

    def _build_2d(self, nx: int, ny: int):
        h = self.h
        idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)

        def family(n_along: int, n_across: int, node):
            # faces between node(i, j) and node(i + 1, j), j across the face row
            rows_a, cols_a, vals_a = [], [], []
            rows_c, cols_c, vals_c = [], [], []
            w = []
            f = 0
            for i in range(n_along):
                for j in range(n_across + 1):
                    rows_a += [f, f]
                    cols_a += [node(i, j), node(i + 1, j)]
                    vals_a += [-1.0 / h, 1.0 / h]
                    if 0 < j < n_across:
                        lo, hi, span = j - 1, j + 1, 4.0 * h
                    elif j == 0:
                        lo, hi, span = 0, 1, 2.0 * h
                    else:
                        lo, hi, span = n_across - 1, n_across, 2.0 * h
                    for ii in (i, i + 1):
                        rows_c += [f, f]
                        cols_c += [node(ii, hi), node(ii, lo)]
                        vals_c += [1.0 / span, -1.0 / span]
                    w.append(0.5 * h * h * (0.5 if j in (0, n_across) else 1.0))
                    f += 1
            shape = (f, (nx + 1) * (ny + 1))
            ga = sps.csr_matrix((vals_a, (rows_a, cols_a)), shape=shape)
            gc = sps.csr_matrix((vals_c, (rows_c, cols_c)), shape=shape)
            return ga, gc, np.array(w)

        gxx, gxy, wx = family(nx, ny, lambda i, j: idx[i, j])
        gyy, gyx, wy = family(ny, nx, lambda i, j: idx[j, i])
        self.G = [sps.vstack([gxx, gyx]).tocsr(), sps.vstack([gxy, gyy]).tocsr()]
        self.weights = np.concatenate([wx, wy])

    def face_gradient(self, u: np.ndarray) -> np.ndarray:
        u = u.ravel()
        return np.stack([g @ u for g in self.G], axis=-1)

    def divergence(self, flux: np.ndarray) -> np.ndarray:
        """Nodal divergence of face fluxes (flat), the negative weighted adjoint of G."""
        out = np.zeros(self.n_nodes)
        for c in range(self.dim):
            out -= self.GT[c] @ (self.weights * flux[:, c])
        return out / self.mass

    def apply_blocks(self, K: np.ndarray, v: np.ndarray) -> np.ndarray:
        """G^T W K G v / mass for per-face symmetric blocks K (faces, dim, dim)."""
        gv = self.face_gradient(v)
        kg = np.einsum("fcd,fd->fc", K, gv)
        return -self.divergence(kg)

    def block_diagonal(self, K: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_nodes)
        for (c, d), gg in self._GG.items():
            out += gg @ (self.weights * K[:, c, d])
        return out / self.mass


@lru_cache(maxsize=32)
def staggered_operator(grid: SpaceTimeGrid) -> StaggeredOperator:
    return StaggeredOperator(grid)


def _flux_and_weight(a: np.ndarray, m: np.ndarray, p: float, eps: float):
    """Face flux <a,Ma>^((p-2)/2) M a and its scalar diffusivity."""
    ma = a @ m.T
    s = np.sum(a * ma, axis=-1) + eps * eps
    if eps == 0.0:
        if p < 2.0:
            raise RegimeError("the singular regime needs eps_reg > 0")
        diff = np.where(s > 0, s, 0.0) ** (0.5 * (p - 2.0)) if p != 2.0 else np.ones_like(s)
    else:
        diff = s ** (0.5 * (p - 2.0))
    return diff[:, None] * ma, diff, ma, s


def _jacobian_blocks(a: np.ndarray, m: np.ndarray, p: float, eps: float) -> np.ndarray:
    _, diff, ma, s = _flux_and_weight(a, m, p, eps)
    outer = np.einsum("fc,fd->fcd", ma, ma)
    return diff[:, None, None] * (m[None] + (p - 2.0) * outer / s[:, None, None])


def _picard_blocks(a: np.ndarray, m: np.ndarray, p: float, eps: float) -> np.ndarray:
    _, diff, _, _ = _flux_and_weight(a, m, p, eps)
    return diff[:, None, None] * m[None]


def _discrete_div(op: StaggeredOperator, u: np.ndarray, problem: Problem, eps: float) -> np.ndarray:
    flux, *_ = _flux_and_weight(op.face_gradient(u), problem.flux_matrix.a, problem.p.p, eps)
    return op.divergence(flux)


def admissible_dt(u_slice: np.ndarray, problem: Problem, config: SolveConfig) -> float:
    """Largest forward-Euler step keeping the scheme monotone, scaled by cfl_safety.

    The flux derivative is (p-1) times the diffusivity for p >= 2, hence the
    extra factor in the bound.
    """
    g, p = problem.grid, problem.p.p
    op = staggered_operator(g)
    _, diff, _, _ = _flux_and_weight(op.face_gradient(u_slice), problem.flux_matrix.a, p,
                                     config.eps_reg)
    dmax = float(np.max(diff)) * max(p - 1.0, 1.0) * problem.flux_matrix.lam_max
    if dmax <= 0.0:
        return math.inf
    return config.cfl_safety * g.h ** 2 / (2.0 * g.dim * dmax)


def step_explicit(u_slice, problem: Problem, config: SolveConfig, t: float | None = None,
                  dt: float | None = None) -> np.ndarray:
    """One forward-Euler step from time ``t`` (default t0) of size ``dt`` (default grid dt)."""
    g = problem.grid
    t = g.t0 if t is None else t
    dt = g.dt if dt is None else dt
    u = np.asarray(u_slice, dtype=float).ravel()
    limit = admissible_dt(u, problem, config)
    if dt > limit * (1.0 + 1e-12):
        raise CFLViolation(dt, limit)
    op = staggered_operator(g)
    rate = _discrete_div(op, u, problem, config.eps_reg)
    f = problem.source_at(t)
    if f is not None:
        rate = rate + f.ravel()
    u_next = u + dt * rate
    u_next[op.boundary] = problem.boundary_at(t + dt).ravel()[op.boundary]
    return u_next.reshape(g.spatial_shape)


def _cg(apply, diag: np.ndarray, rhs: np.ndarray, atol: float) -> np.ndarray:
    n = rhs.size
    A = LinearOperator((n, n), matvec=apply, dtype=float)
    M = LinearOperator((n, n), matvec=lambda v: v / diag, dtype=float)
    x, info = cg(A, rhs, rtol=1e-12, atol=atol, M=M, maxiter=20 * n)
    if info < 0:
        raise SolverError("CG breakdown in implicit step")
    return x


def step_implicit(u_slice, problem: Problem, config: SolveConfig, t: float | None = None,
                  dt: float | None = None, return_iterations: bool = False):
    """Backward-Euler step solved by damped Newton, with Picard steps as fallback."""
    g = problem.grid
    p = problem.p.p
    m = problem.flux_matrix.a
    t = g.t0 if t is None else t
    dt = g.dt if dt is None else dt
    op = staggered_operator(g)
    I = op.interior
    eps_res = config.eps_reg
    eps_jac = max(config.eps_reg, config.jacobian_eps)

    u_old = np.asarray(u_slice, dtype=float).ravel()
    rhs = u_old.copy()
    f = problem.source_at(t + dt)
    if f is not None:
        rhs = rhs + dt * f.ravel()
    u = u_old.copy()
    u[op.boundary] = problem.boundary_at(t + dt).ravel()[op.boundary]

    def residual(v):
        return (v - rhs - dt * _discrete_div(op, v, problem, eps_res))[I]

    def linear_solve(K, r):
        full = np.zeros(op.n_nodes)

        def apply(x):
            full[I] = x
            return x + dt * op.apply_blocks(K, full)[I]

        diag = 1.0 + dt * op.block_diagonal(K)[I]
        return _cg(apply, diag, -r, atol=1e-3 * config.nonlinear_tol)

    R = residual(u)
    for it in range(1, config.max_nonlinear_iters + 1):
        rn = float(np.max(np.abs(R))) if R.size else 0.0
        if rn <= config.nonlinear_tol:
            return (u.reshape(g.spatial_shape), it) if return_iterations else u.reshape(g.spatial_shape)
        a = op.face_gradient(u)
        delta = linear_solve(_jacobian_blocks(a, m, p, eps_jac), R)
        base = float(np.linalg.norm(R))
        step, accepted = 1.0, False
        while step >= 1.0 / 64:
            trial = u.copy()
            trial[I] += step * delta
            Rt = residual(trial)
            if np.linalg.norm(Rt) < (1.0 - 1e-4 * step) * base:
                u, R, accepted = trial, Rt, True
                break
            step *= 0.5
        if not accepted:
            log.debug("Newton line search failed at iteration %d; Picard step", it)
            u = u.copy()
            u[I] += linear_solve(_picard_blocks(a, m, p, eps_jac), R)
            R = residual(u)
    raise NonlinearConvergenceError(float(np.max(np.abs(R))), config.max_nonlinear_iters)


def solve(problem: Problem, config: SolveConfig | None = None) -> ScalarField:
    """Full space-time field; explicit runs subcycle each grid step to satisfy the CFL bound."""
    config = config or SolveConfig()
    g = problem.grid
    if config.eps_reg == 0.0 and not problem.p.degenerate:
        raise RegimeError("the singular regime needs eps_reg > 0")
    out = np.empty(g.shape)
    u = problem.initial.copy()
    u.reshape(-1)[staggered_operator(g).boundary] = problem.boundary_at(g.t0).ravel()[
        staggered_operator(g).boundary]
    out[0] = u
    for n in range(g.nt):
        t = g.t0 + n * g.dt
        if config.scheme is Scheme.IMPLICIT_EULER:
            u = step_implicit(u, problem, config, t, g.dt)
        else:
            u = _explicit_interval(u, problem, config, t, g.dt)
        out[n + 1] = u
    return ScalarField(g, out)


def _explicit_interval(u, problem, config, t, span):
    done = 0.0
    while span - done > 1e-14 * span:
        remaining = span - done
        try:
            u = step_explicit(u, problem, config, t + done, remaining)
            done = span
        except CFLViolation as exc:
            k = math.ceil(remaining / exc.admissible)
            sub = remaining / k
            u = step_explicit(u, problem, config, t + done, sub)
            done += sub
    return u
