"""Vector algebra of the p-Laplacian.

All maps act on arrays whose last axis holds vector components, so they
vectorize over grids and over batches of random samples alike.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Regime",
    "PExponent",
    "FluxMatrix",
    "RegimeError",
    "as_pexp",
    "p_flux",
    "f_map",
    "p_flux_regularized",
    "aniso_flux",
    "aniso_flux_regularized",
    "ineq7_gap",
    "ineq8_gap",
    "young3_gap",
    "epsilon_absorption",
    "tol_alg",
]


class RegimeError(ValueError):
    """Exponent outside the range an operation accepts."""


class Regime(str, Enum):
    DEGENERATE = "degenerate"
    SINGULAR_EXPERIMENTAL = "singular_experimental"


@dataclass(frozen=True)
class PExponent:
    p: float

    def __post_init__(self):
        p = float(self.p)
        if not np.isfinite(p) or p <= 1.0:
            raise RegimeError(f"p must exceed 1, got {self.p}")
        object.__setattr__(self, "p", p)

    @property
    def regime(self) -> Regime:
        return Regime.DEGENERATE if self.p >= 2.0 else Regime.SINGULAR_EXPERIMENTAL

    @property
    def degenerate(self) -> bool:
        return self.regime is Regime.DEGENERATE

    @property
    def conjugate(self) -> float:
        """p/(p-1), the integrability exponent of the time derivative."""
        return self.p / (self.p - 1.0)

    def require_degenerate(self, strict: bool = False) -> float:
        if strict and self.p <= 2.0:
            raise RegimeError(f"operation needs p > 2, got {self.p}")
        if not self.degenerate:
            raise RegimeError(f"operation needs p >= 2, got {self.p}")
        return self.p


def as_pexp(p) -> PExponent:
    return p if isinstance(p, PExponent) else PExponent(p)


def _norm(a: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a, axis=-1, keepdims=True)


def _safe_pow(r: np.ndarray, e: float) -> np.ndarray:
    """r**e with 0**e := 0 for e >= 0 (the vector factor kills it anyway)."""
    if e == 0.0:
        return np.ones_like(r)
    with np.errstate(divide="ignore"):
        return np.where(r > 0, r, 0.0) ** e


def p_flux(a, p) -> np.ndarray:
    """|a|^(p-2) a."""
    p = as_pexp(p).require_degenerate()
    a = np.asarray(a, dtype=float)
    return _safe_pow(_norm(a), p - 2.0) * a


def f_map(a, p) -> np.ndarray:
    """|a|^((p-2)/2) a, whose squared length is |a|^p."""
    p = as_pexp(p).require_degenerate()
    a = np.asarray(a, dtype=float)
    return _safe_pow(_norm(a), 0.5 * (p - 2.0)) * a


def p_flux_regularized(a, p, eps_reg: float) -> np.ndarray:
    """(|a|^2 + eps^2)^((p-2)/2) a; usable for any p > 1 when eps > 0."""
    p = as_pexp(p).p
    if eps_reg <= 0:
        raise ValueError("eps_reg must be positive")
    a = np.asarray(a, dtype=float)
    s = np.sum(a * a, axis=-1, keepdims=True) + eps_reg ** 2
    return s ** (0.5 * (p - 2.0)) * a


@dataclass(frozen=True)
class FluxMatrix:
    """Constant symmetric coefficient matrix with ellipticity constant ``lam``."""

    a: np.ndarray
    lam: float | None = None

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("flux matrix must be square")
        if not np.allclose(a, a.T, rtol=0, atol=1e-14 * max(1.0, np.abs(a).max())):
            raise ValueError("flux matrix must be symmetric")
        eig = np.linalg.eigvalsh(a)
        lam = float(eig[0]) if self.lam is None else float(self.lam)
        if lam <= 0 or eig[0] < lam * (1 - 1e-12):
            raise ValueError(f"matrix not elliptic with constant {lam}: eigenvalues {eig}")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def identity(cls, dim: int) -> FluxMatrix:
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def lam_max(self) -> float:
        return float(np.linalg.eigvalsh(self.a)[-1])


def aniso_flux(a, m: FluxMatrix, p) -> np.ndarray:
    """<a, M a>^((p-2)/2) M a."""
    p = as_pexp(p).require_degenerate()
    a = np.asarray(a, dtype=float)
    ma = a @ m.a.T
    s = np.sum(a * ma, axis=-1, keepdims=True)
    return _safe_pow(s, 0.5 * (p - 2.0)) * ma


def aniso_flux_regularized(a, m: FluxMatrix, p, eps_reg: float) -> np.ndarray:
    p = as_pexp(p).p
    a = np.asarray(a, dtype=float)
    ma = a @ m.a.T
    s = np.sum(a * ma, axis=-1) + eps_reg ** 2
    return (s ** (0.5 * (p - 2.0)))[..., None] * ma


def tol_alg(a, b, p) -> np.ndarray:
    """Tolerance scaled like the degree-p homogeneous inequalities."""
    p = as_pexp(p).p
    na = np.linalg.norm(np.asarray(a, dtype=float), axis=-1)
    nb = np.linalg.norm(np.asarray(b, dtype=float), axis=-1)
    return 1e-10 * (1.0 + na + nb) ** p


def ineq7_gap(a, b, p) -> np.ndarray:
    """<V(b) - V(a), b - a> - (4/p^2)|F(b) - F(a)|^2 with V = p_flux, F = f_map."""
    p = as_pexp(p).require_degenerate()
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mono = np.sum((p_flux(b, p) - p_flux(a, p)) * (b - a), axis=-1)
    df = f_map(b, p) - f_map(a, p)
    return mono - 4.0 / p ** 2 * np.sum(df * df, axis=-1)


def ineq8_gap(a, b, p) -> np.ndarray:
    """(p-1)(|b|^((p-2)/2) + |a|^((p-2)/2))|F(b) - F(a)| - |V(b) - V(a)|."""
    p = as_pexp(p).require_degenerate()
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    e = 0.5 * (p - 2.0)
    wa = _safe_pow(np.linalg.norm(a, axis=-1), e)
    wb = _safe_pow(np.linalg.norm(b, axis=-1), e)
    df = np.linalg.norm(f_map(b, p) - f_map(a, p), axis=-1)
    dv = np.linalg.norm(p_flux(b, p) - p_flux(a, p), axis=-1)
    return (p - 1.0) * (wa + wb) * df - dv


def young3_gap(a, b, c, eps, p) -> np.ndarray:
    """eps^2 a^2/2 + eps^-p b^p/p + (p-2) c^(2p/(p-2))/(2p) - abc, for p > 2."""
    p = as_pexp(p).require_degenerate(strict=True)
    a, b, c, eps = (np.asarray(v, dtype=float) for v in (a, b, c, eps))
    if np.any(a < 0) or np.any(b < 0) or np.any(c < 0) or np.any(eps <= 0):
        raise ValueError("young3_gap needs a, b, c >= 0 and eps > 0")
    r = 2.0 * p / (p - 2.0)
    with np.errstate(over="ignore"):
        rhs = 0.5 * eps ** 2 * a ** 2 + eps ** (-p) * b ** p / p + (p - 2.0) * c ** r / (2.0 * p)
    return rhs - a * b * c


def epsilon_absorption(p) -> float:
    """The eps with p(p-1)eps^2/2 = 2/p^2, i.e. half of 4/p^2."""
    p = as_pexp(p).require_degenerate()
    return float(np.sqrt(4.0 / (p ** 3 * (p - 1.0))))
