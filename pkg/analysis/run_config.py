"""
analysis/run_config.py

JSON run configuration for the command line: converter description, sweep
axis, harmonic settings and tolerances, validated with field-path
diagnostics.

Example::

    {
      "scheme": "PVMC",
      "power_stage": {"L": 1e-6, "C": 1e-4, "R": 2, "vs": 10, "vr": 4, "Vh": 1, "fs": 1e6},
      "compensator": {"kp": 80},
      "axis": "D:0.05:0.95:181",
      "hb": {"K": 200, "tail_tolerance": 1e-6},
      "simulation": {"cycles": 400, "period_tol": 1e-5},
      "duty": 0.41
    }
"""

import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional

import numpy as np

from analysis.converter_models import REQUIRED_FIELDS, CompensatorParams, PowerStageParams, Scheme
from analysis.harmonic_balance import HBSettings
from utils.errors import ConfigError, ModelError
from utils.settings import Settings, load_settings

logger = logging.getLogger('RunConfig')

POWER_STAGE_FIELDS = tuple(f.name for f in fields(PowerStageParams))
COMPENSATOR_FIELDS = tuple(f.name for f in fields(CompensatorParams) if f.name != "scheme")
TOP_LEVEL_KEYS = ("scheme", "power_stage", "compensator", "axis", "hb", "simulation", "duty", "format")


@dataclass(frozen=True)
class SweepAxis:
    """Uniform sweep ``name:min:max:points``."""

    name: str
    lo: float
    hi: float
    points: int

    @classmethod
    def parse(cls, text: str, field: str = "axis") -> "SweepAxis":
        parts = str(text).split(":")
        if len(parts) != 4:
            raise ConfigError(f"expected name:min:max:points, got {text!r}", field)
        name = parts[0].strip()
        try:
            lo, hi, points = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as e:
            raise ConfigError(f"bad number in {text!r} ({e})", field) from e
        if not name:
            raise ConfigError("axis name is empty", field)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ConfigError(f"bounds must be finite with min < max, got {lo:g}:{hi:g}", field)
        if points < 2:
            raise ConfigError(f"points must be >= 2, got {points}", field)
        return cls(name, lo, hi, points)

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)

    def __str__(self) -> str:
        return f"{self.name}:{self.lo:g}:{self.hi:g}:{self.points}"


@dataclass(frozen=True)
class RunConfig:
    power_stage: PowerStageParams
    compensator: CompensatorParams
    axis: Optional[SweepAxis] = None
    hb: HBSettings = field(default_factory=HBSettings)
    cycles: int = 400
    period_tol: float = 1e-5
    duty: Optional[float] = None
    x_init: Optional[List[float]] = None
    fmt: str = "csv"

    @property
    def scheme(self) -> Scheme:
        return self.compensator.scheme

    def with_parameter(self, name: str, value: float) -> "RunConfig":
        """Copy with one power-stage or compensator parameter replaced."""
        if name in POWER_STAGE_FIELDS:
            return replace(self, power_stage=self.power_stage.with_values(**{name: float(value)}))
        if name in COMPENSATOR_FIELDS:
            return replace(self, compensator=self.compensator.with_values(**{name: float(value)}))
        raise ConfigError(
            f"unknown parameter {name!r}; expected one of {', '.join(POWER_STAGE_FIELDS + COMPENSATOR_FIELDS)}",
            "axis",
        )


def _number(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError("must be finite", field)
    return value


def _section(doc: Dict[str, Any], key: str) -> Dict[str, Any]:
    section = doc.get(key, {})
    if not isinstance(section, dict):
        raise ConfigError("expected an object", key)
    return section


def _numbers(section: Dict[str, Any], allowed: tuple, prefix: str) -> Dict[str, float]:
    values = {}
    for name, value in section.items():
        if name not in allowed:
            raise ConfigError(f"unknown field; expected one of {', '.join(allowed)}", f"{prefix}.{name}")
        values[name] = _number(value, f"{prefix}.{name}")
    return values


def run_config_from_dict(doc: Dict[str, Any], settings: Optional[Settings] = None) -> RunConfig:
    """
    Validate a configuration document.

    Raises:
        ConfigError: With the dotted path of the first offending field
    """
    settings = settings or load_settings()
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in doc:
        if key not in TOP_LEVEL_KEYS:
            raise ConfigError(f"unknown key; expected one of {', '.join(TOP_LEVEL_KEYS)}", key)
    if "scheme" not in doc:
        raise ConfigError("missing", "scheme")
    try:
        scheme = Scheme.parse(doc["scheme"])
    except ModelError as e:
        raise ConfigError(str(e), "scheme") from e

    ps_values = _numbers(_section(doc, "power_stage"), POWER_STAGE_FIELDS, "power_stage")
    for name in ("L", "C", "R"):
        if name not in ps_values:
            raise ConfigError("missing", f"power_stage.{name}")
    ps = PowerStageParams(**ps_values)
    try:
        ps.validate()
    except ModelError as e:
        raise ConfigError(str(e), "power_stage") from e

    cp_values = _numbers(_section(doc, "compensator"), COMPENSATOR_FIELDS, "compensator")
    cp_values.setdefault("delta", settings.delta)
    for name in REQUIRED_FIELDS[scheme]:
        if name not in cp_values:
            raise ConfigError(f"required by {scheme.value}", f"compensator.{name}")
        if cp_values[name] <= 0:
            raise ConfigError("must be positive", f"compensator.{name}")
    cp = CompensatorParams(scheme=scheme, **cp_values)

    axis = SweepAxis.parse(doc["axis"]) if doc.get("axis") is not None else None
    if axis is not None and axis.name != "D" and axis.name not in POWER_STAGE_FIELDS + COMPENSATOR_FIELDS:
        raise ConfigError(f"unknown parameter {axis.name!r}", "axis")

    hb_section = _numbers(_section(doc, "hb"), ("K", "tail_tolerance"), "hb")
    K = int(hb_section.get("K", settings.hb_harmonics))
    if K < 1:
        raise ConfigError("must be >= 1", "hb.K")
    hb = HBSettings(K=K, tail_tolerance=hb_section.get("tail_tolerance", settings.hb_tail_tolerance))

    sim = _section(doc, "simulation")
    x_init = sim.get("x_init")
    sim_numbers = _numbers({k: v for k, v in sim.items() if k != "x_init"}, ("cycles", "period_tol"), "simulation")
    cycles = int(sim_numbers.get("cycles", 400))
    if cycles < 1:
        raise ConfigError("must be >= 1", "simulation.cycles")
    if x_init is not None:
        if not isinstance(x_init, list):
            raise ConfigError("expected a list of numbers", "simulation.x_init")
        x_init = [_number(v, f"simulation.x_init[{i}]") for i, v in enumerate(x_init)]

    duty = None
    if doc.get("duty") is not None:
        duty = _number(doc["duty"], "duty")
        if not 0.0 < duty < 1.0:
            raise ConfigError("must lie in (0, 1)", "duty")

    fmt = doc.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("must be csv or json", "format")

    return RunConfig(
        power_stage=ps,
        compensator=cp,
        axis=axis,
        hb=hb,
        cycles=cycles,
        period_tol=sim_numbers.get("period_tol", settings.period_tol),
        duty=duty,
        x_init=x_init,
        fmt=fmt,
    )


def load_run_config(path: str, settings: Optional[Settings] = None) -> RunConfig:
    """
    Read and validate a JSON configuration file.

    Raises:
        ConfigError: Unreadable file, malformed JSON or invalid field
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}", "--config") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}", "--config") from e
    config = run_config_from_dict(doc, settings)
    logger.info(f"Loaded {config.scheme.value} configuration from {path}")
    return config
