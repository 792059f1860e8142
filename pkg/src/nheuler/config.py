"""JSON run configuration (schema version 1)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .solver import SolverConfig

CONFIG_VERSION = 1
_DENSITY_SCENARIOS = ("stratified_shear", "density_patch_vortex")


class SolverSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cfl: float = Field(0.4, gt=0, le=1)
    pressure_tol: float = Field(1e-10, gt=0)
    pressure_max_iter: int = Field(500, ge=1)
    coevolve: bool = False
    dt: Optional[float] = Field(None, gt=0)
    grad_ceiling: float = Field(1e6, gt=0)
    resolution_tol: float = Field(1e-8, gt=0)


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: Literal[1] = CONFIG_VERSION
    scenario: Literal["homogeneous_vortex", "stratified_shear", "density_patch_vortex", "custom"]
    params: dict[str, Any] = Field(default_factory=dict)
    n: int = 128
    horizon: float = Field(1.0, ge=0)
    solver: SolverSection = Field(default_factory=SolverSection)
    criterion_mode: Literal["subcritical", "critical_sum", "critical_sup"] = "subcritical"
    growth_threshold: float = Field(1.0, gt=0)
    cadence: int = Field(1, ge=1)
    checkpoint_every: int = Field(0, ge=0)   # steps between checkpoints; 0 keeps initial and final only
    output_dir: Optional[str] = None
    seed: int = 0

    @field_validator("n")
    @classmethod
    def _power_of_two(cls, n):
        if n < 16 or n & (n - 1):
            raise ValueError("grid size must be a power of two >= 16")
        return n

    @model_validator(mode="after")
    def _scenario_params(self):
        if self.scenario in _DENSITY_SCENARIOS:
            c = self.params.get("contrast", 2.0)
            if not isinstance(c, (int, float)) or c < 1:
                raise ValueError("params.contrast (rho^*/rho_*) must be a number >= 1")
        if self.scenario == "custom" and "path" not in self.params:
            raise ValueError("custom scenario needs params.path pointing at a checkpoint")
        return self

    def solver_config(self) -> SolverConfig:
        return SolverConfig(cadence=self.cadence, **self.solver.model_dump())


def parse_config(text: str, source: str = "<config>") -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        lines = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            lines.append(f"{source}: field '{loc}': {err['msg']}")
        raise ConfigError("\n".join(lines)) from exc


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
