"""Run configuration: one validated model tree per simulation and analysis run."""
from typing import Any, Dict, List, Optional
import json
import logging

from pydantic import (
    BaseModel,
    Extra,
    Field,
    ValidationError as PydanticValidationError,
    root_validator,
    validator,
)

from src.models.flow import FlowConfig
from src.models.potentials import PotentialSpec
from src.utils.constants import Defaults, Integrator, PotentialFamily, Tolerances
from src.utils.exceptions import ConfigError
from src.utils.time_utils import parse_dt_policy

logger = logging.getLogger(__name__)


class _Block(BaseModel):
    class Config:
        extra = Extra.forbid
        use_enum_values = False


class DomainBlock(_Block):
    m: int = Field(..., ge=2)
    n_per_axis: int = Field(..., ge=4)
    period: float = Field(..., gt=0)


class MatrixBlock(_Block):
    l: int = Field(2, ge=2)
    k: int = Field(1, ge=1)
    winding: Optional[List[int]] = None
    seed: Optional[int] = None
    perturbation: float = 0.0
    # a constant initial matrix replaces the winding field when given
    constant: Optional[List[List[float]]] = None

    @validator("k")
    def k_below_l(cls, v, values):
        if "l" in values and not v < values["l"]:
            raise ValueError(f"k must be below l={values['l']}")
        return v

    @validator("constant")
    def constant_is_symmetric(cls, v, values):
        if v is None:
            return v
        size = len(v)
        if any(len(row) != size for row in v):
            raise ValueError("constant matrix must be square")
        if "l" in values and size != values["l"]:
            raise ValueError(f"constant matrix must be {values['l']} x {values['l']}")
        if any(v[i][j] != v[j][i] for i in range(size) for j in range(size)):
            raise ValueError("constant matrix must be symmetric")
        return v


class PotentialBlock(_Block):
    family: PotentialFamily
    b: Optional[float] = None
    L: int = 1
    disabled: bool = False

    @validator("b")
    def b_positive(cls, v):
        if v is not None and not v > 0:
            raise ValueError("b must be positive")
        return v

    @validator("L")
    def L_only_for_higher_power(cls, v, values):
        if v < 1:
            raise ValueError("L must be at least 1")
        family = values.get("family")
        if v != 1 and family != PotentialFamily.HIGHER_POWER:
            raise ValueError("L != 1 is only valid for the HigherPower family")
        return v

    @root_validator(skip_on_failure=True)
    def b_required(cls, values):
        if values["family"] != PotentialFamily.SINGULAR and values.get("b") is None:
            raise ValueError(f"b is required for the {values['family'].value} family")
        return values

    def to_spec(self, l: int) -> PotentialSpec:
        return PotentialSpec(self.family, self.b, self.L, l, self.disabled)


class FlowBlock(_Block):
    integrator: Integrator = Integrator.SPECTRAL_IMEX
    dt: str = "adaptive"
    t_end: float = Field(1.0, gt=0)
    snapshot_stride: int = Field(Defaults.SNAPSHOT_STRIDE, ge=1)
    max_steps: Optional[int] = Field(None, ge=1)

    @validator("dt", pre=True)
    def dt_policy(cls, v):
        return str(parse_dt_policy(str(v)))

    def to_flow_config(self) -> FlowConfig:
        return FlowConfig(
            dt_policy=parse_dt_policy(self.dt),
            t_end=self.t_end,
            snapshot_stride=self.snapshot_stride,
            integrator=self.integrator,
            max_steps=self.max_steps,
        )


class AnalysisBlock(_Block):
    centers: Optional[List[int]] = None
    center_count: int = Field(4, ge=1)
    radii: Optional[List[float]] = None
    delta: float = Field(Defaults.DELTA, gt=0, le=0.75)
    eps0: Optional[float] = Field(None, gt=0)
    b_sweep: List[float] = Field(default_factory=lambda: list(Defaults.CALIBRATION_B))
    rho: Optional[float] = Field(None, gt=0)
    slack: float = Field(Tolerances.MONOTONICITY_SLACK, ge=0)
    psi_radii: Optional[List[float]] = None

    @validator("radii", "psi_radii")
    def ascending_positive(cls, v):
        if v is None:
            return v
        if not v or any(r <= 0 for r in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("radii must be positive and strictly ascending")
        return v

    @validator("b_sweep")
    def sweep_positive(cls, v):
        if not v or any(b <= 0 for b in v):
            raise ValueError("b_sweep must be a non-empty list of positive values")
        return v


class OutputBlock(_Block):
    directory: str = "output"
    emit_snapshots: bool = True
    emit_series: bool = True


class RunConfig(_Block):
    domain: DomainBlock
    matrix: MatrixBlock = Field(default_factory=MatrixBlock)
    potential: PotentialBlock
    flow: FlowBlock = Field(default_factory=FlowBlock)
    analysis: AnalysisBlock = Field(default_factory=AnalysisBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)

    def spec(self) -> PotentialSpec:
        return self.potential.to_spec(self.matrix.l)

    def resolved(self) -> Dict[str, Any]:
        """Plain dict with every default filled in."""
        return json.loads(self.json())


def _coerce(raw: str) -> Any:
    raw = raw.strip()
    try:
        return json.loads(raw)
    except ValueError:
        return raw.strip('"\'')


def _parse_dotted(text: str) -> Dict[str, Any]:
    """Parse `section.key = value` lines into a nested dict."""
    data: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {number}: expected 'section.key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        parts = key.split(".")
        if not all(parts):
            raise ConfigError(f"Line {number}: malformed key {key!r}", config_key=key)
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"Line {number}: {key!r} conflicts with an earlier value", config_key=key)
        node[parts[-1]] = _coerce(value)
    return data


def parse_config(text: str) -> RunConfig:
    """Parse JSON or dotted key-value text into a validated RunConfig.

    Raises:
        ConfigError: naming the offending dotted key
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except ValueError as e:
            raise ConfigError(f"Invalid JSON configuration: {e}")
    else:
        data = _parse_dotted(text)

    try:
        config = RunConfig.parse_obj(data)
    except PydanticValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"] if part != "__root__")
        raise ConfigError(f"Invalid configuration at {key}: {first['msg']}", config_key=key)

    if config.matrix.winding is not None and len(config.matrix.winding) != config.domain.m:
        raise ConfigError(
            f"matrix.winding needs {config.domain.m} entries, got {len(config.matrix.winding)}",
            config_key="matrix.winding",
        )
    sites = config.domain.n_per_axis ** config.domain.m
    if config.analysis.centers and any(not 0 <= c < sites for c in config.analysis.centers):
        raise ConfigError(f"analysis.centers must be site indices below {sites}", config_key="analysis.centers")
    r_m = config.domain.period / 4
    if config.analysis.rho is not None and config.analysis.rho > r_m:
        raise ConfigError(f"analysis.rho must not exceed R_M={r_m}", config_key="analysis.rho")
    if config.analysis.radii and config.analysis.radii[-1] >= r_m:
        raise ConfigError(f"analysis.radii must stay below R_M={r_m}", config_key="analysis.radii")

    logger.debug(f"Parsed configuration: {config.resolved()}")
    return config


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigError(f"Could not read configuration {path}: {e}", config_key="path")
    return parse_config(text)
