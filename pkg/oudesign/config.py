import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError
from pydantic import field_validator, model_validator

from .exceptions import ConfigError, OUDesignError
from .models import Criterion

logger = logging.getLogger("oudesign")


class QuadratureSettings(BaseModel):
    """Tolerances for adaptive quadrature."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    abs_tol: float = Field(1e-10, gt=0.0)
    rel_tol: float = Field(1e-8, gt=0.0)
    max_subdivisions: int = Field(2000, ge=10)


class OptimizerSettings(BaseModel):
    """Coordinate-exchange settings for design optimisation."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    grid_size: int = Field(401, ge=3)
    refine_rounds: int = Field(3, ge=0)
    min_gap: Optional[float] = Field(None, gt=0.0, description="Defaults to 1e-6 of the domain span.")
    restarts: int = Field(5, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    max_sweeps: int = Field(50, ge=1)


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    params: Dict[str, float]
    x0_parameter: bool = False

    @field_validator("name")
    @classmethod
    def known_model(cls, value: str) -> str:
        from .registry import registry

        if value not in registry.names():
            raise ValueError(f"unknown model '{value}'; available: {registry.names()}")
        return value

    @model_validator(mode="after")
    def buildable(self) -> "ModelConfig":
        try:
            self.build()
        except OUDesignError as e:
            raise ValueError(e.message)
        return self

    def build(self):
        from .registry import make_builtin_model

        return make_builtin_model(self.name, self.params, x0_parameter=self.x0_parameter)


class DomainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_lo: float = Field(1.0, gt=0.0)
    t_hi: float = 2.0

    @model_validator(mode="after")
    def ordered(self) -> "DomainConfig":
        if not self.t_lo < self.t_hi:
            raise ValueError(f"t_lo must be below t_hi, got [{self.t_lo}, {self.t_hi}]")
        return self

    def build(self):
        from .models import Domain

        return Domain(self.t_lo, self.t_hi)


class SelectionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kept: List[str] = Field(min_length=1)
    known: List[str] = Field(default_factory=list)


class TableConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    y: List[float]
    mu: List[float]
    g: List[float]
    sigma: float = Field(gt=0.0)
    y_ref: Optional[float] = None


class SdeConfig(BaseModel):
    """A nonlinear SDE given by builtin name or by tabulated columns."""
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    table: Optional[TableConfig] = None
    t_grid: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    y_grid: List[float] = Field(min_length=3)

    @model_validator(mode="after")
    def one_source(self) -> "SdeConfig":
        if (self.name is None) == (self.table is None):
            raise ValueError("give exactly one of 'name' or 'table'")
        return self

    def build(self):
        from .outype import make_nonlinear_sde, tabulated_sde

        if self.table is not None:
            t = self.table
            return tabulated_sde(t.y, t.mu, t.g, t.sigma, t.y_ref)
        return make_nonlinear_sde(self.name, self.params)


class RunConfig(BaseModel):
    """Validated input of one CLI run."""
    model_config = ConfigDict(extra="forbid")

    command: Optional[Literal[
        "moments", "fim", "asymptotic", "ueff", "optimize", "check-outype", "mc-validate", "figure1"
    ]] = None
    model: Optional[ModelConfig] = None
    sde: Optional[SdeConfig] = None
    domain: DomainConfig = Field(default_factory=DomainConfig)
    design: Optional[List[float]] = None
    n: List[int] = Field(default_factory=list)
    criteria: List[Criterion] = Field(default_factory=lambda: [Criterion.E])
    selection: Optional[SelectionConfig] = None
    optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    quadrature: QuadratureSettings = Field(default_factory=QuadratureSettings)
    seed: int = Field(0, ge=0, lt=2**64)
    replications: int = Field(2000, ge=100)
    output: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def flat_model(cls, data: Any) -> Any:
        """Fold {"model": name, "params": {...}} into the nested model section."""
        if isinstance(data, dict) and isinstance(data.get("model"), str):
            data = dict(data)
            section = {"name": data.pop("model"), "params": data.pop("params", {})}
            if "x0_parameter" in data:
                section["x0_parameter"] = data.pop("x0_parameter")
            data["model"] = section
        return data

    @field_validator("n")
    @classmethod
    def positive_sizes(cls, value: List[int]) -> List[int]:
        if any(n < 1 for n in value):
            raise ValueError("design sizes must be positive")
        return value

    @model_validator(mode="after")
    def labels_exist(self) -> "RunConfig":
        if self.selection is not None:
            if self.model is None:
                raise ValueError("'selection' needs a 'model'")
            names = self.model.build().partition.names
            unknown = [x for x in self.selection.kept + self.selection.known if x not in names]
            if unknown:
                raise ValueError(f"selection labels {unknown} are not parameters of {self.model.name}")
        return self

    def build_selection(self, model):
        """Selection from the config, defaulting to the drift parameters of the model."""
        from .models import ParameterRole, SubvectorSelection

        if self.selection is not None:
            return SubvectorSelection.complete(model.partition, self.selection.kept, self.selection.known)
        kept = model.partition.labels_with(ParameterRole.MEAN) + model.partition.labels_with(ParameterRole.SHARED)
        return SubvectorSelection.complete(model.partition, kept)


def _field_path(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def parse_config(text: str, fmt: str = "json") -> RunConfig:
    """Parse JSON (or YAML) text into a RunConfig, raising ConfigError with line or field diagnostics."""
    if fmt == "json":
        try:
            data: Any = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(
                f"Malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}",
                details={"line": e.lineno, "column": e.colno},
            )
    elif fmt == "yaml":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
            raise ConfigError(f"Malformed YAML{where}: {str(e)}")
    else:
        raise ConfigError(f"Unsupported config format '{fmt}'")
    if not isinstance(data, dict):
        raise ConfigError("Configuration must be a mapping at the top level")
    try:
        return RunConfig.model_validate(data)
    except PydanticValidationError as e:
        problems = [f"{_field_path(err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError(
            "Invalid configuration: " + "; ".join(problems),
            details={"fields": [_field_path(err["loc"]) for err in e.errors()]},
        )


def load_config(path: str) -> RunConfig:
    """Read a config file; .yaml/.yml files are parsed as YAML, everything else as JSON."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {str(e)}")
    fmt = "yaml" if p.suffix.lower() in (".yaml", ".yml") else "json"
    logger.debug(f"Loading {fmt} config from {path}")
    return parse_config(text, fmt)
