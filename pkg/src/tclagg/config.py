"""YAML scenario configuration with strict schema checking."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .params import TclParams


@dataclass
class InitConfig:
    # point | uniform | gaussian | quasi-stationary
    type: str = "point"
    mode: int = 0
    theta: float | None = None
    low: float | None = None
    high: float | None = None
    std: float | None = None


@dataclass
class PopulationConfig:
    n_p: int
    init: InitConfig = field(default_factory=InitConfig)


@dataclass
class ParamsConfig:
    theta_s: float = 20.0
    delta: float = 0.5
    theta_a: float = 32.0
    R: float = 2.0
    C: float = 10.0
    P_rate: float = 14.0
    eta: float = 2.5
    h_seconds: float = 10.0
    sigma: float = 0.032

    def build(self) -> TclParams:
        return TclParams(**dataclasses.asdict(self))


@dataclass
class DistributionConfig:
    type: str = "uniform"
    lo: float | None = None
    hi: float | None = None
    values: list[float] | None = None


@dataclass
class HeterogeneityConfig:
    parameter: str = "C"
    distribution: DistributionConfig = field(default_factory=DistributionConfig)
    mode: str = "averaging"
    n_clusters: int = 1


@dataclass
class AbstractionConfig:
    method: str = "stochastic"
    l: int = 7
    m: int = 35
    n_d: int = 5
    baseline_method: str = "overlap"


@dataclass
class ControlConfig:
    mode: str = "none"
    horizon: int = 5
    rate_limit: float | None = 0.025
    kappa: float = 0.0
    Rv_fraction: float = 0.005


@dataclass
class ReferenceConfig:
    type: str = "constant"
    values: list[float] = field(default_factory=lambda: [1.0])
    relative: bool = True
    segment_steps: int = 90


@dataclass
class SimulationConfig:
    steps: int
    mc_runs: int = 50
    seed: int = 0


@dataclass
class ReductionConfig:
    enabled: bool = False
    order: int = 6


@dataclass
class BoundsConfig:
    horizons: list[int] = field(default_factory=lambda: [2, 6, 12])
    empirical: bool = False


@dataclass
class ScenarioConfig:
    population: PopulationConfig
    simulation: SimulationConfig
    params: ParamsConfig = field(default_factory=ParamsConfig)
    abstraction: AbstractionConfig = field(default_factory=AbstractionConfig)
    heterogeneity: HeterogeneityConfig | None = None
    control: ControlConfig = field(default_factory=ControlConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    reduction: ReductionConfig = field(default_factory=ReductionConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _unwrap_optional(tp):
    args = typing.get_args(tp)
    if typing.get_origin(tp) is typing.Union or type(tp).__name__ == "UnionType":
        non_none = [a for a in args if a is not type(None)]
        if len(non_none) == 1:
            return non_none[0], True
    return tp, False


def _coerce(value, tp, path):
    tp, optional = _unwrap_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{path}: value required")
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    origin = typing.get_origin(tp)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        (inner,) = typing.get_args(tp)
        return [_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    return value


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path + '.' if path else ''}{key}: unknown key")
    kwargs = {}
    for f in dataclasses.fields(cls):
        sub = f"{path + '.' if path else ''}{f.name}"
        if f.name in data:
            kwargs[f.name] = _coerce(data[f.name], hints[f.name], sub)
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(f"{sub}: required field missing")
    return cls(**kwargs)


def _validate(cfg: ScenarioConfig):
    try:
        params = cfg.params.build()
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None
    ab = cfg.abstraction
    if ab.method not in ("stochastic", "deterministic"):
        raise ConfigError("abstraction.method: must be stochastic or deterministic")
    if not 0 < ab.l < ab.m:
        raise ConfigError("abstraction.l: need 0 < l < m")
    if ab.n_d < 2:
        raise ConfigError("abstraction.n_d: must be at least 2")
    if ab.baseline_method not in ("overlap", "representative"):
        raise ConfigError("abstraction.baseline_method: must be overlap or representative")
    if cfg.population.n_p < 1:
        raise ConfigError("population.n_p: must be positive")
    init = cfg.population.init
    if init.type not in ("point", "uniform", "gaussian", "quasi-stationary"):
        raise ConfigError(f"population.init.type: unknown type {init.type!r}")
    if init.mode not in (0, 1):
        raise ConfigError("population.init.mode: must be 0 or 1")
    if init.type == "uniform" and not (init.low is not None and init.high is not None
                                       and init.high > init.low):
        raise ConfigError("population.init.low: uniform init needs low < high")
    if init.type == "gaussian" and not (init.std and init.std > 0):
        raise ConfigError("population.init.std: gaussian init needs std > 0")
    sim = cfg.simulation
    if sim.steps < 1:
        raise ConfigError("simulation.steps: must be at least 1")
    if sim.mc_runs < 1:
        raise ConfigError("simulation.mc_runs: must be at least 1")
    het = cfg.heterogeneity
    if het is not None:
        if het.parameter not in {f.name for f in dataclasses.fields(ParamsConfig)}:
            raise ConfigError(f"heterogeneity.parameter: unknown parameter {het.parameter!r}")
        if het.mode not in ("averaging", "clustering"):
            raise ConfigError("heterogeneity.mode: must be averaging or clustering")
        d = het.distribution
        if d.type == "uniform":
            if d.lo is None or d.hi is None or not d.hi > d.lo:
                raise ConfigError("heterogeneity.distribution.lo: uniform needs lo < hi")
        elif d.type == "list":
            if not d.values or len(d.values) != cfg.population.n_p:
                raise ConfigError("heterogeneity.distribution.values: need one value per TCL")
        else:
            raise ConfigError(f"heterogeneity.distribution.type: unknown {d.type!r}")
        if het.n_clusters < 1:
            raise ConfigError("heterogeneity.n_clusters: must be at least 1")
        if het.mode == "averaging" and cfg.population.n_p < 2:
            raise ConfigError("population.n_p: averaging needs at least 2 TCLs")
        for v in (d.lo, d.hi) if d.type == "uniform" else d.values:
            try:
                params.replace(**{het.parameter: float(v)})
            except ValueError as exc:
                raise ConfigError(f"heterogeneity.distribution: {exc}") from None
    ctl = cfg.control
    if ctl.mode not in ("none", "onestep", "smpc"):
        raise ConfigError("control.mode: must be none, onestep or smpc")
    if ctl.horizon < 1:
        raise ConfigError("control.horizon: must be at least 1")
    if ctl.rate_limit is not None and ctl.rate_limit < 0:
        raise ConfigError("control.rate_limit: must be non-negative")
    if not ctl.Rv_fraction > 0:
        raise ConfigError("control.Rv_fraction: must be positive")
    if ctl.mode != "none" and 2 * ab.l > ab.m:
        raise ConfigError("abstraction.m: set-point control needs m >= 2 l")
    ref = cfg.reference
    if ref.type not in ("constant", "piecewise"):
        raise ConfigError("reference.type: must be constant or piecewise")
    if not ref.values or any(v <= 0 for v in ref.values):
        raise ConfigError("reference.values: need positive levels")
    if ref.segment_steps < 1:
        raise ConfigError("reference.segment_steps: must be positive")
    if cfg.reduction.enabled and cfg.reduction.order < 1:
        raise ConfigError("reduction.order: must be positive")
    if any(N < 0 for N in cfg.bounds.horizons):
        raise ConfigError("bounds.horizons: must be non-negative")
    if params.sigma <= 0 and ab.method == "stochastic":
        raise ConfigError("params.sigma: the stochastic abstraction needs sigma > 0")


def parse_config(data) -> ScenarioConfig:
    cfg = _build(ScenarioConfig, data, "")
    _validate(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return parse_config(data)
