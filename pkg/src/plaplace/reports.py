"""Serializable report records shared by the verifier and the command line."""

from __future__ import annotations

import math
from typing import Any

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

Scalar = float | int | str | bool | None


def _check_finite(obj: Any, where: str) -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite number in {where}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _check_finite(v, where)


class EstimateReport(BaseModel):
    """Measured sides of one estimate on one grid."""

    model_config = ConfigDict(extra="forbid")

    name: str
    lhs: float
    rhs: float
    ratio: float | None = None
    grid_tag: str = ""
    params: dict[str, Scalar | list[Scalar]] = {}
    extra: dict[str, float] = {}
    finite: bool = True

    @field_validator("lhs", "rhs")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("report sides must be finite")
        return v

    @model_validator(mode="after")
    def _ratio(self):
        if self.ratio is None and self.rhs > 0:
            r = self.lhs / self.rhs
            # an overflowing quotient leaves the ratio undefined
            self.ratio = r if math.isfinite(r) else None
        elif self.ratio is not None and not math.isfinite(self.ratio):
            raise ValueError("ratio must be finite")
        _check_finite(self.extra, "extra")
        _check_finite(self.params, "params")
        return self


class CheckResult(BaseModel):
    """One acceptance rule evaluated over refinement levels."""

    model_config = ConfigDict(extra="forbid")

    name: str
    rule: str
    passed: bool
    rows: list[dict[str, Scalar]] = []
    reports: list[EstimateReport] = []
    notes: list[str] = []

    @model_validator(mode="after")
    def _rows_finite(self):
        _check_finite(self.rows, self.name)
        return self


class RunReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: str
    config: dict[str, Any]
    checks: list[CheckResult] = []
    tables: dict[str, list[dict[str, Scalar]]] = {}

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def dumps(self) -> str:
        return self.model_dump_json(indent=1)

    @classmethod
    def loads(cls, text: str) -> RunReport:
        return cls.model_validate_json(text)
