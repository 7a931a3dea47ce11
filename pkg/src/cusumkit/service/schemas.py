"""Request and response schemas for the HTTP service.

Every response carries the same envelope: a ``schema_version`` string,
a ``spec`` echo of the validated request (defaults resolved), the
``results`` payload, and ``diagnostics``.  The CLI renders these
verbatim, so field order here is the field order users see.
"""

from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = "1"

UNITS_NOTE = (
    "All boundaries, thresholds, and start values are in log-likelihood-ratio "
    "units; for the Gaussian shift model a threshold quoted in observation "
    "units converts as h = theta * h_obs."
)

_BOUNDARY_LIMIT = 500.0


def _require_finite(name: str, value: float) -> float:
    if value is None or not math.isfinite(value):
        raise ValueError(f"{name} must be finite")
    return float(value)


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _ModelRequest(_Request):
    theta: float

    @field_validator("theta")
    @classmethod
    def _theta_valid(cls, value: float) -> float:
        value = _require_finite("theta", value)
        if value == 0.0:
            raise ValueError("theta must be nonzero")
        return value


def _check_test_boundaries(a: float, b: float) -> None:
    _require_finite("a", a)
    _require_finite("b", b)
    if not (a <= 0.0 < b):
        raise ValueError(f"boundaries must satisfy a <= 0 < b, got a={a}, b={b}")
    if b > _BOUNDARY_LIMIT or a < -_BOUNDARY_LIMIT:
        raise ValueError(f"boundaries must lie within [-{_BOUNDARY_LIMIT}, {_BOUNDARY_LIMIT}]")


def _check_chart_geometry(h: float, w: float) -> None:
    _require_finite("h", h)
    _require_finite("w", w)
    if h <= 0.0:
        raise ValueError(f"control limit must be positive, got h={h}")
    if h > _BOUNDARY_LIMIT:
        raise ValueError(f"control limit must not exceed {_BOUNDARY_LIMIT}")
    if not 0.0 <= w < h:
        raise ValueError(f"headstart must satisfy 0 <= w < h, got w={w}, h={h}")


class SprtRequest(_ModelRequest):
    a: float
    b: float
    n: int = Field(default=256, ge=2, le=4096)
    at: list[float] = Field(default_factory=lambda: [0.0], min_length=1)

    @model_validator(mode="after")
    def _consistent(self) -> "SprtRequest":
        _check_test_boundaries(self.a, self.b)
        for x in self.at:
            _require_finite("at", x)
            if not self.a <= x <= self.b:
                raise ValueError(
                    f"evaluation point {x} lies outside [{self.a}, {self.b}]"
                )
        return self


class CusumArlRequest(_ModelRequest):
    h: float
    w: float = 0.0
    n: int = Field(default=256, ge=2, le=4096)
    method: Literal["via-sprt", "direct"] = "via-sprt"

    @model_validator(mode="after")
    def _consistent(self) -> "CusumArlRequest":
        _check_chart_geometry(self.h, self.w)
        return self


class RunLengthRequest(_ModelRequest):
    h: float
    w: float = 0.0
    n: int = Field(default=256, ge=2, le=4096)
    n_max: Optional[int] = Field(default=None, ge=1, le=10**6)

    @model_validator(mode="after")
    def _consistent(self) -> "RunLengthRequest":
        _check_chart_geometry(self.h, self.w)
        return self


class MomentsRequest(_ModelRequest):
    h: float
    w: float = 0.0
    n: int = Field(default=256, ge=2, le=4096)
    k_max: int = Field(default=2, ge=1, le=12)
    tail_tol: float = Field(default=1e-9, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _consistent(self) -> "MomentsRequest":
        _check_chart_geometry(self.h, self.w)
        return self


class SimulateRequest(_ModelRequest):
    reps: int = Field(ge=1, le=10**9)
    seed: int = Field(default=0, ge=0)
    hypothesis: Literal["h0", "h1", "both"] = "both"
    # sequential-test geometry
    a: Optional[float] = None
    b: Optional[float] = None
    start: Optional[float] = None
    # chart geometry
    h: Optional[float] = None
    w: Optional[float] = None
    step_cap: Optional[int] = Field(default=None, ge=1)
    survival_n_max: Optional[int] = Field(default=None, ge=0, le=10**7)
    workers: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _geometry(self) -> "SimulateRequest":
        test_given = any(v is not None for v in (self.a, self.b, self.start))
        chart_given = any(v is not None for v in (self.h, self.w))
        if test_given and chart_given:
            raise ValueError(
                "give either test boundaries (a, b, start) or chart geometry "
                "(h, w), not both"
            )
        if not test_given and not chart_given:
            raise ValueError("give test boundaries (a, b) or chart geometry (h)")
        if test_given:
            if self.a is None or self.b is None:
                raise ValueError("test simulation needs both a and b")
            _check_test_boundaries(self.a, self.b)
            if self.start is None:
                self.start = 0.0
            _require_finite("start", self.start)
            if not self.a <= self.start <= self.b:
                raise ValueError(
                    f"start {self.start} lies outside [{self.a}, {self.b}]"
                )
            if self.step_cap is not None or self.survival_n_max is not None:
                raise ValueError(
                    "step_cap and survival_n_max apply only to chart simulation"
                )
        else:
            if self.h is None:
                raise ValueError("chart simulation needs h")
            if self.w is None:
                self.w = 0.0
            _check_chart_geometry(self.h, self.w)
        return self


class BenchRequest(_Request):
    sizes: list[int] = Field(default_factory=lambda: [128, 256, 512, 1024], min_length=1)
    theta: float = 1.0
    a: float = -2.0
    b: float = 2.0
    repeats: int = Field(default=5, ge=1, le=100)

    @field_validator("sizes")
    @classmethod
    def _sizes_valid(cls, sizes: list[int]) -> list[int]:
        for n in sizes:
            if not 2 <= n <= 4096:
                raise ValueError(f"grid size {n} must lie in [2, 4096]")
        return sizes

    @model_validator(mode="after")
    def _consistent(self) -> "BenchRequest":
        value = _require_finite("theta", self.theta)
        if value == 0.0:
            raise ValueError("theta must be nonzero")
        _check_test_boundaries(self.a, self.b)
        return self


class SolveDiagnostics(BaseModel):
    grid_size: int
    condition_estimate: float
    factorization_count: int
    units: str = UNITS_NOTE


class RunLengthDiagnostics(BaseModel):
    grid_size: int
    n_max: int
    factorization_count: int
    units: str = UNITS_NOTE


class MomentsDiagnostics(BaseModel):
    grid_size: int
    condition_estimate: float
    factorization_count: int
    rho0: float
    rho1: float
    steps0: int
    steps1: int
    units: str = UNITS_NOTE


class SimulateDiagnostics(BaseModel):
    step_cap_h0: Optional[int] = None
    step_cap_h1: Optional[int] = None
    units: str = UNITS_NOTE


class BenchDiagnostics(BaseModel):
    timing_note: str = (
        "seconds are wall-clock medians and vary run to run; factorization "
        "counts and numerical outputs are deterministic"
    )
    units: str = UNITS_NOTE


class SprtRow(BaseModel):
    x: float
    n0: float
    p0: float
    n1: float
    p1: float


class SprtResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    spec: SprtRequest
    results: list[SprtRow]
    diagnostics: SolveDiagnostics


class CusumArlResults(BaseModel):
    arl0: float
    arl1: float
    method: str


class CusumArlResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    spec: CusumArlRequest
    results: CusumArlResults
    diagnostics: SolveDiagnostics


class RunLengthRow(BaseModel):
    n: int
    survival0: float
    survival1: float


class RunLengthResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    spec: RunLengthRequest
    results: list[RunLengthRow]
    diagnostics: RunLengthDiagnostics


class MomentsRow(BaseModel):
    k: int
    mu0: float
    mu1: float


class MomentsResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    spec: MomentsRequest
    results: list[MomentsRow]
    diagnostics: MomentsDiagnostics


class SimulateRow(BaseModel):
    hypothesis: Literal["h0", "h1"]
    quantity: Literal["asn", "oc", "arl", "survival"]
    n: Optional[int] = None
    mean: float
    std_error: float
    reps: int


class SimulateResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    spec: SimulateRequest
    results: list[SimulateRow]
    diagnostics: SimulateDiagnostics


class BenchRowSchema(BaseModel):
    n: int
    grouped_seconds: float
    baseline_seconds: float
    speedup: float
    grouped_factorizations: int
    baseline_factorizations: int
    max_abs_diff: float


class BenchResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    spec: BenchRequest
    results: list[BenchRowSchema]
    diagnostics: BenchDiagnostics


class HealthResponse(BaseModel):
    status: str
    version: str
