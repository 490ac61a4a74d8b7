"""Reference solutions: the Barenblatt source solution and manufactured fields."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .grid import ScalarField, SpaceTimeGrid
from .pflux import PExponent, as_pexp

__all__ = [
    "BarenblattParams",
    "barenblatt",
    "barenblatt_bracket",
    "barenblatt_gradient",
    "barenblatt_radius",
    "barenblatt_field",
    "barenblatt_mass",
    "MANUFACTURED",
    "manufactured_solution",
    "manufactured_expressions",
]


@dataclass(frozen=True)
class BarenblattParams:
    n: int
    p: PExponent
    C: float = 1.0

    def __post_init__(self):
        p = as_pexp(self.p)
        if p.p <= 2.0:
            raise ValueError("Barenblatt solution needs p > 2")
        if self.C <= 0:
            raise ValueError("mass parameter C must be positive")
        if self.n < 1:
            raise ValueError("dimension must be positive")
        object.__setattr__(self, "p", p)

    @property
    def lambda_exp(self) -> float:
        return self.n * (self.p.p - 2.0) + self.p.p

    @property
    def q(self) -> float:
        p, lam = self.p.p, self.lambda_exp
        return (p - 2.0) / p * lam ** (1.0 / (1.0 - p))


def _radius(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if n == 1:
        return np.abs(x[..., 0] if x.ndim and x.shape[-1:] == (1,) else x)
    return np.linalg.norm(x, axis=-1)


def barenblatt_bracket(x, t, params: BarenblattParams) -> np.ndarray:
    """C - q (|x| t^(-1/lambda))^(p/(p-1)), before taking the positive part."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("Barenblatt solution is defined for t > 0")
    p, lam = params.p.p, params.lambda_exp
    xi = _radius(x, params.n) * t ** (-1.0 / lam)
    return params.C - params.q * xi ** (p / (p - 1.0))


def barenblatt(x, t, params: BarenblattParams) -> np.ndarray:
    """t^(-n/lambda) [bracket]_+^((p-1)/(p-2)); ``x`` has a trailing axis of length n when n > 1."""
    p, lam = params.p.p, params.lambda_exp
    br = np.maximum(barenblatt_bracket(x, t, params), 0.0)
    return np.asarray(t, dtype=float) ** (-params.n / lam) * br ** ((p - 1.0) / (p - 2.0))


def barenblatt_gradient(x, t, params: BarenblattParams) -> np.ndarray:
    """Closed-form spatial gradient, trailing component axis of length n."""
    p, lam, n = params.p.p, params.lambda_exp, params.n
    x = np.asarray(x, dtype=float)
    vec = x[..., None] if (n == 1 and x.shape[-1:] != (1,)) else x
    r = np.linalg.norm(vec, axis=-1)
    t = np.asarray(t, dtype=float)
    br = np.maximum(barenblatt_bracket(x, t, params), 0.0)
    # d/dr of bracket = -q p/(p-1) r^(1/(p-1)) t^(-p/(lam (p-1)))
    dbr = -params.q * p / (p - 1.0) * r ** (1.0 / (p - 1.0)) * t ** (-p / (lam * (p - 1.0)))
    du_dr = t ** (-n / lam) * (p - 1.0) / (p - 2.0) * br ** (1.0 / (p - 2.0)) * dbr
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[..., None] > 0, vec / r[..., None], 0.0)
    return du_dr[..., None] * unit


def barenblatt_radius(t, params: BarenblattParams) -> np.ndarray:
    p, lam = params.p.p, params.lambda_exp
    return (params.C / params.q) ** ((p - 1.0) / p) * np.asarray(t, dtype=float) ** (1.0 / lam)


def barenblatt_field(grid: SpaceTimeGrid, params: BarenblattParams) -> ScalarField:
    if grid.t0 <= 0:
        raise ValueError("Barenblatt sampling needs t0 > 0")
    if grid.dim != params.n:
        raise ValueError("grid dimension must match Barenblatt dimension")
    pts = grid.points()
    vals = np.stack([barenblatt(pts, t, params) for t in grid.t])
    return ScalarField(grid, vals)


def barenblatt_mass(t, params: BarenblattParams, nodes: int = 20001) -> float:
    """Radial quadrature of the total mass at time t."""
    from scipy.special import gamma

    n = params.n
    r = np.linspace(0.0, float(barenblatt_radius(t, params)), nodes)
    pts = np.zeros(r.shape + (n,))
    pts[:, 0] = r
    surface = 2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0)
    return float(surface * np.trapezoid(barenblatt(pts, t, params) * r ** (n - 1), r))


# manufactured solutions ------------------------------------------------------

_X, _Y, _T = sp.symbols("x y t", real=True)

MANUFACTURED = ("constant", "heat_sine", "poly_exp", "x4_steady")


def manufactured_expressions(expr_id: str, dim: int) -> sp.Expr:
    pi = sp.pi
    if expr_id == "constant":
        return sp.Integer(1)
    if expr_id == "heat_sine":
        if dim == 1:
            return sp.exp(-pi ** 2 * _T) * sp.sin(pi * _X)
        return sp.exp(-2 * pi ** 2 * _T) * sp.sin(pi * _X) * sp.sin(pi * _Y)
    if expr_id == "poly_exp":
        if dim == 1:
            return sp.exp(-_T) * (1 + _X ** 2 + _X ** 3)
        return sp.exp(-_T) * (1 + _X ** 2 + _X * _Y + _Y ** 3)
    if expr_id == "x4_steady":
        return _X ** 4 if dim == 1 else _X ** 4 + _Y ** 4
    raise KeyError(f"unknown manufactured solution {expr_id!r}; choose from {MANUFACTURED}")


@lru_cache(maxsize=64)
def _lambdified(expr_id: str, dim: int, p: float):
    u = manufactured_expressions(expr_id, dim)
    xs = (_X,) if dim == 1 else (_X, _Y)
    grads = [sp.diff(u, v) for v in xs]
    mag2 = sum(g ** 2 for g in grads)
    # |grad u|^(p-2) written through mag2 so p = 2 stays polynomial
    weight = mag2 ** (sp.nsimplify(p - 2) / 2) if p != 2 else sp.Integer(1)
    div = sum(sp.diff(weight * g, v) for g, v in zip(grads, xs))
    source = sp.diff(u, _T) - div
    args = (*xs, _T)
    return sp.lambdify(args, u, "numpy"), sp.lambdify(args, source, "numpy")


def manufactured_solution(expr_id: str, grid: SpaceTimeGrid, p) -> tuple[ScalarField, ScalarField]:
    """Exact field and source f = u_t - div(|grad u|^(p-2) grad u), sampled on ``grid``."""
    p = as_pexp(p)
    fu, fs = _lambdified(expr_id, grid.dim, p.p)
    coords = np.meshgrid(grid.t, *grid.axes, indexing="ij")
    args = (*coords[1:], coords[0])
    u = np.broadcast_to(np.asarray(fu(*args), dtype=float), grid.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.broadcast_to(np.asarray(fs(*args), dtype=float), grid.shape)
    # degenerate points where the symbolic weight is 0 * inf: the source limit is 0
    f = np.where(np.isfinite(f), f, 0.0)
    return ScalarField(grid, u), ScalarField(grid, f)
