"""Case configuration schema (JSON files, unknown keys rejected)."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

SWEEP_AXES = ("delta_h", "r_enri", "n_terms", "l_x", "omega")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EnrichmentConfig(_Strict):
    """``r_enri`` is R/a for the plate and 2R/B for the rectangle."""

    strategy: Literal["point", "patch", "radius"] = "radius"
    r_enri: float = Field(0.2, gt=0)
    n_terms: Optional[int] = Field(None, ge=1, le=5)
    basis: Optional[Literal["corner_flow", "analytic"]] = None


class MeshConfig(_Strict):
    """Plate lengths are in units of the half-width a."""

    delta_h: float = Field(0.125, gt=0)
    domain_half_size: float = Field(2.0, gt=0)
    n_rx: int = Field(15, ge=1)
    n_ox: int = Field(120, ge=1)
    n_oy: int = Field(20, ge=1)
    lx_over_lambda: float = Field(2.0, gt=0)
    stretch: float = Field(1.1, gt=0)
    inner_size: Optional[float] = Field(None, gt=0)
    mesh_file: Optional[str] = None


class PhysicsConfig(_Strict):
    omega2B_2g: list[float] = Field(default_factory=lambda: [1.0])
    reference_omega2B_2g: Optional[float] = Field(None, gt=0)
    beam: float = Field(2.0, gt=0)
    draft: float = Field(1.0, gt=0)
    depth_over_draft: float = Field(40.0, gt=0)
    g: float = Field(9.81, gt=0)
    rho: float = Field(1.0, gt=0)
    amplitude: float = Field(1.0, gt=0)
    half_width: float = Field(1.0, gt=0)
    stream: float = -1.0
    mean_force: bool = True

    @field_validator("omega2B_2g")
    @classmethod
    def _positive(cls, v):
        if not v or any(not x > 0 for x in v):
            raise ValueError("omega2B_2g must be a non-empty list of positive values")
        return v


class QuadratureConfig(_Strict):
    adaptive_tolerance: float = Field(1e-10, gt=0)
    line_tolerance: float = Field(1e-10, gt=0)
    max_levels: int = Field(200, ge=1)
    base_order: int = Field(10, ge=1, le=40)
    enriched_gauss: int = Field(6, ge=1, le=10)


class SolverSettings(_Strict):
    residual_tolerance: float = Field(1e-10, gt=0)


class CaseConfig(_Strict):
    name: str = "case"
    case: Literal["flat_plate", "heaving_rectangle"]
    method: Literal["fem", "xfem"] = "xfem"
    order: Literal["linear", "quadratic"] = "quadratic"
    enrichment: EnrichmentConfig = Field(default_factory=EnrichmentConfig)
    mesh: MeshConfig = Field(default_factory=MeshConfig)
    physics: PhysicsConfig = Field(default_factory=PhysicsConfig)
    quadrature: QuadratureConfig = Field(default_factory=QuadratureConfig)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    sweep: dict[Literal["delta_h", "r_enri", "n_terms", "l_x", "omega"], list[float]] = Field(
        default_factory=dict)

    @model_validator(mode="after")
    def _consistent(self):
        if self.case == "heaving_rectangle" and self.enrichment.basis == "analytic":
            raise ValueError("analytic enrichment is only available for the flat plate")
        return self

    @property
    def order_int(self) -> int:
        return 1 if self.order == "linear" else 2

    @property
    def n_terms(self) -> int:
        if self.enrichment.n_terms is not None:
            return self.enrichment.n_terms
        return 1 if self.basis_kind == "analytic" else 3

    @property
    def basis_kind(self) -> str:
        if self.enrichment.basis is not None:
            return self.enrichment.basis
        return "analytic" if self.case == "flat_plate" else "corner_flow"


def parse_config(data: dict) -> CaseConfig:
    try:
        return CaseConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid case config: {exc}") from None


def load_config(path) -> CaseConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return parse_config(data)
