"""Run configuration: JSON sections, defaults and validation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .exponents import ExponentError, ModelParams, intercritical_bounds

FAMILIES = ("groundstate-scaled", "gaussian", "custom-csv")
DEFAULT_SCALES = (0.3, 0.5, 0.7, 0.9, 1.2, 2.0, 3.0)


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class ValidationError(ConfigError):
    pass


@dataclass
class ModelSection:
    N: float
    b: float
    p: float


@dataclass
class GridSection:
    n: int = 8192
    r_max: float = 40.0
    sponge_on: bool = False


@dataclass
class EvolveSection:
    dt: float
    t_final: float = 10.0
    snapshot_stride: int = 10


@dataclass
class CriteriaSection:
    R_crit: float = 10.0
    epsilon_sq_fraction: float = 0.01


@dataclass
class InitSection:
    family: str = "groundstate-scaled"
    scale: float = 0.5
    width: float = 1.0
    path: str | None = None


@dataclass
class OutputSection:
    directory: str = "out"
    prefix: str = "run"


@dataclass
class SweepSection:
    scales: tuple = DEFAULT_SCALES


@dataclass
class DecaySection:
    dims: tuple = (3.0, 2.5)
    t_start: float = 2.0
    t_end: float = 20.0
    n: int = 16384
    r_max: float = 320.0
    dt: float = 0.01


@dataclass
class RunConfig:
    model: ModelSection
    grid: GridSection
    evolve: EvolveSection
    criteria: CriteriaSection = field(default_factory=CriteriaSection)
    init: InitSection = field(default_factory=InitSection)
    output: OutputSection = field(default_factory=OutputSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    decay: DecaySection = field(default_factory=DecaySection)

    @property
    def params(self) -> ModelParams:
        return ModelParams.create(self.model.N, self.model.b, self.model.p)

    def echo(self) -> dict:
        d = asdict(self)
        d["model"]["s_c"] = self.params.s_c
        return d


_SECTIONS = {
    "model": ModelSection, "grid": GridSection, "evolve": EvolveSection,
    "criteria": CriteriaSection, "init": InitSection, "output": OutputSection,
    "sweep": SweepSection, "decay": DecaySection,
}
_REQUIRED = {"model": ("N", "b", "p"), "evolve": ("dt",)}


def _number(sec, key, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{sec}.{key} must be a number, got {v!r}")
    if not math.isfinite(v):
        raise ValidationError(f"{sec}.{key} must be finite")
    if integer:
        if int(v) != v:
            raise ValidationError(f"{sec}.{key} must be an integer")
        return int(v)
    return float(v)


def _build(name: str, raw) -> object:
    cls = _SECTIONS[name]
    if not isinstance(raw, dict):
        raise ValidationError(f"section {name} must be an object")
    known = cls.__dataclass_fields__
    extra = sorted(set(raw) - set(known))
    if extra:
        raise ValidationError(f"unknown key {name}.{extra[0]}")
    for k in _REQUIRED.get(name, ()):
        if k not in raw:
            raise ValidationError(f"{name}.{k} required")
    vals = {}
    for k, v in raw.items():
        typ = known[k].type
        if typ == "bool":
            if not isinstance(v, bool):
                raise ValidationError(f"{name}.{k} must be true or false")
            vals[k] = v
        elif typ == "int":
            vals[k] = _number(name, k, v, integer=True)
        elif typ == "float":
            vals[k] = _number(name, k, v)
        elif typ == "tuple":
            if not isinstance(v, list) or not v:
                raise ValidationError(f"{name}.{k} must be a non-empty list")
            vals[k] = tuple(_number(name, k, x) for x in v)
        else:
            if v is not None and not isinstance(v, str):
                raise ValidationError(f"{name}.{k} must be a string")
            vals[k] = v
    return cls(**vals)


def validate(cfg: RunConfig) -> RunConfig:
    m = cfg.model
    if not m.N > 2:
        raise ValidationError("model.N must exceed 2")
    if not 0 <= m.b < min(m.N / 2, 2):
        raise ValidationError("model.b must satisfy 0 <= b < min(N/2, 2)")
    lo, hi = intercritical_bounds(m.N, m.b)
    if not lo < m.p < hi:
        raise ValidationError(f"p outside intercritical range ({lo:g}, {hi:g})")
    try:
        cfg.params
    except ExponentError as exc:
        raise ValidationError(str(exc)) from None
    g = cfg.grid
    if g.n < 16:
        raise ValidationError("grid.n must be at least 16")
    if not g.r_max > 0:
        raise ValidationError("grid.r_max must be positive")
    e = cfg.evolve
    if not e.dt > 0:
        raise ValidationError("evolve.dt must be positive")
    if not e.t_final > 0:
        raise ValidationError("evolve.t_final must be positive")
    if e.snapshot_stride < 1:
        raise ValidationError("evolve.snapshot_stride must be at least 1")
    c = cfg.criteria
    if not 0 < c.R_crit < g.r_max:
        raise ValidationError("criteria.R_crit must lie in (0, grid.r_max)")
    if c.R_crit / 2 <= 5 * g.r_max / g.n:
        raise ValidationError("criteria.R_crit too small for the grid spacing")
    if not 0 < c.epsilon_sq_fraction < 1:
        raise ValidationError("criteria.epsilon_sq_fraction must lie in (0, 1)")
    i = cfg.init
    if i.family not in FAMILIES:
        raise ValidationError(f"init.family must be one of {FAMILIES}")
    if not i.width > 0:
        raise ValidationError("init.width must be positive")
    if i.family == "custom-csv" and not i.path:
        raise ValidationError("init.path required for family custom-csv")
    d = cfg.decay
    if any(not x > 2 for x in d.dims):
        raise ValidationError("decay.dims must exceed 2")
    if not 0 < d.t_start < d.t_end:
        raise ValidationError("decay needs 0 < t_start < t_end")
    if not (d.dt > 0 and d.r_max > 0 and d.n >= 16):
        raise ValidationError("decay.dt, decay.r_max, decay.n must be positive")
    return cfg


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ValidationError("top level must be an object")
    extra = sorted(set(raw) - set(_SECTIONS))
    if extra:
        raise ValidationError(f"unknown key {extra[0]}")
    for sec in ("model", "evolve"):
        if sec not in raw:
            raise ValidationError(f"{sec}.{_REQUIRED[sec][0]} required")
    kw = {k: _build(k, raw.get(k, {})) for k in _SECTIONS}
    return validate(RunConfig(**kw))


def parse_config(path) -> RunConfig:
    """Read a JSON config file. ParseError carries the offending line."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ParseError(f"{path} is not UTF-8") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    return config_from_dict(raw)


def default_config() -> RunConfig:
    return config_from_dict({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": 1e-3}})
