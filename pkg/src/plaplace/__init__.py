"""Finite-difference solver and estimate verifier for u_t = div(|grad u|^(p-2) grad u)."""

from .grid import ScalarField, SpaceTimeGrid, SubCylinder, VectorField
from .pflux import PExponent, f_map, p_flux
from .solver import Problem, Scheme, SolveConfig, solve

__version__ = "0.1.0"

__all__ = [
    "PExponent",
    "Problem",
    "ScalarField",
    "Scheme",
    "SolveConfig",
    "SpaceTimeGrid",
    "SubCylinder",
    "VectorField",
    "f_map",
    "p_flux",
    "solve",
]
