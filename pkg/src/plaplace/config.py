"""Experiment configuration: a strict TOML schema validated with pydantic."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .campaign import BOUNDARY_KINDS, INITIAL_KINDS, ProblemSpec, VerifyParams
from .solver import Scheme, SolveConfig

CHECKS = (
    "inequalities",
    "oracle_gate",
    "heat_explicit",
    "heat_implicit",
    "convergence",
    "weak_form",
    "caccioppoli",
    "estimate9",
    "dq_sobolev",
    "theorem1",
    "transition",
    "energy_sup",
    "mollification",
)
# checks that consume a refinement sequence of the configured problem
FIELD_CHECKS = CHECKS[4:]
SWEEP_AXES = ("p", "sigma", "beta")


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemConfig(_Strict):
    p: float = 3.0
    dim: Literal[1, 2] = 1
    initial: str = "barenblatt"
    boundary: str = "exact"
    extent: tuple[float, float] | None = None
    time: tuple[float, float] = (1.0, 2.0)
    mass: float = 1.0
    constant: float = 1.0

    @field_validator("initial")
    @classmethod
    def _initial(cls, v):
        if v not in INITIAL_KINDS:
            raise ValueError(f"initial must be one of {INITIAL_KINDS}")
        return v

    @field_validator("boundary")
    @classmethod
    def _boundary(cls, v):
        if v not in BOUNDARY_KINDS:
            raise ValueError(f"boundary must be one of {BOUNDARY_KINDS}")
        return v

    @model_validator(mode="after")
    def _ranges(self):
        if self.extent is not None and self.extent[1] <= self.extent[0]:
            raise ValueError("extent must be increasing")
        if self.time[1] <= self.time[0]:
            raise ValueError("time interval must be increasing")
        return self

    def spec(self) -> ProblemSpec:
        return ProblemSpec(**self.model_dump())


class SolverSection(_Strict):
    scheme: Literal["explicit", "implicit"] = "explicit"
    nonlinear_tol: float = Field(1e-10, gt=0)
    max_nonlinear_iters: int = Field(50, ge=1)
    eps_reg: float = Field(0.0, ge=0)
    cfl_safety: float = Field(0.5, gt=0, le=1)

    def solve_config(self) -> SolveConfig:
        d = self.model_dump()
        d["scheme"] = Scheme(d["scheme"])
        return SolveConfig(**d)


class RefinementConfig(_Strict):
    levels: list[int] = [64, 128, 256]
    time_levels: list[int] | None = None

    @model_validator(mode="after")
    def _increasing(self):
        for name, seq in (("levels", self.levels), ("time_levels", self.time_levels)):
            if seq is None:
                continue
            if not seq:
                raise ValueError(f"{name} must not be empty")
            if any(b <= a for a, b in zip(seq, seq[1:])):
                raise ValueError(f"refinement {name} must be strictly increasing")
            if min(seq) < 4:
                raise ValueError(f"{name} entries must be at least 4")
        if self.time_levels is not None and len(self.time_levels) != len(self.levels):
            raise ValueError("time_levels must match levels in length")
        return self

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.levels, self.time_levels or self.levels))


class VerifyConfig(_Strict):
    checks: list[str] = []
    field: Literal["solver", "exact"] = "solver"
    gate_first: bool = True
    tau_frac: float = Field(0.1, gt=0, lt=1)
    beta_frac: float = Field(0.1, gt=0, lt=1)
    zeta_radius_frac: float = Field(0.75, gt=0, le=1)
    zeta_core_frac: float = Field(0.0, ge=0, lt=1)
    offset_frac: float = Field(1.0 / 16.0, gt=0)
    dq_offsets: list[int] = [8, 4, 2, 1]
    region_half_width: float | None = None
    sigmas: list[float] = []
    samples: int = Field(1_000_000, ge=1000)
    oracle_p: list[float] = [2.5, 3.0, 4.0]
    oracle_levels: list[int] = [64, 128, 256]
    min_order: float = 0.8

    @field_validator("checks")
    @classmethod
    def _known(cls, v):
        bad = [c for c in v if c not in CHECKS]
        if bad:
            raise ValueError(f"unknown checks {bad}; choose from {CHECKS}")
        if len(set(v)) != len(v):
            raise ValueError("duplicate checks")
        return v

    @field_validator("dq_offsets")
    @classmethod
    def _offsets(cls, v):
        if not v or any(b >= a for a, b in zip(v, v[1:])) or v[-1] < 1:
            raise ValueError("dq_offsets must be positive and strictly decreasing")
        return v

    @field_validator("oracle_levels")
    @classmethod
    def _olevels(cls, v):
        if len(v) < 2 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("oracle_levels must be strictly increasing with at least two entries")
        return v

    def params(self) -> VerifyParams:
        return VerifyParams(
            tau_frac=self.tau_frac, beta_frac=self.beta_frac,
            zeta_radius_frac=self.zeta_radius_frac, zeta_core_frac=self.zeta_core_frac,
            offset_frac=self.offset_frac, dq_offsets=tuple(self.dq_offsets),
            region_half_width=self.region_half_width, sigmas=tuple(self.sigmas))


class SweepConfig(_Strict):
    axis: str = "p"
    values: list[float] = []

    @field_validator("axis")
    @classmethod
    def _axis(cls, v):
        if v not in SWEEP_AXES:
            raise ValueError(f"unknown axis {v!r}; choose from {SWEEP_AXES}")
        return v


class ExperimentConfig(_Strict):
    seed: int = 0
    jobs: int = Field(1, ge=1)
    out: str = "runs/default"
    problem: ProblemConfig = ProblemConfig()
    solver: SolverSection = SolverSection()
    refinement: RefinementConfig = RefinementConfig()
    verify: VerifyConfig = VerifyConfig()
    sweep: SweepConfig = SweepConfig()


def parse_config(data: dict) -> ExperimentConfig:
    from pydantic import ValidationError

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(data)


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Return a re-validated copy with dotted keys replaced, e.g. ``{'problem.p': 4.0}``."""
    data = cfg.model_dump()
    for key, val in changes.items():
        node = data
        *head, last = key.split(".")
        for k in head:
            node = node[k]
        if last not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[last] = val
    return parse_config(data)
