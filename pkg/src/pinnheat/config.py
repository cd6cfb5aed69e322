"""Simulation configuration: dataclasses, TOML parsing, validation, hashing."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .network import Architecture
from .physics import DomainSpec, LossWeights, MaterialProps, SourceSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainHyper:
    epochs_per_phase: int = 20000
    learning_rate: float = 1e-3
    lr_decay: float = 0.9
    lr_decay_every: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    resample_every: int = 500
    reset_adam_per_phase: bool = True
    # residual points per gradient step; 0 means the full interior batch
    minibatch: int = 0

    def __post_init__(self):
        if self.epochs_per_phase < 0:
            raise ValueError("training.epochs_per_phase must be >= 0")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ValueError("training.beta1 and training.beta2 must lie in (0, 1)")
        if not self.eps > 0:
            raise ValueError("training.eps must be > 0")
        if not self.learning_rate > 0:
            raise ValueError("training.learning_rate must be > 0")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("training.lr_decay must lie in (0, 1]")
        if self.lr_decay_every < 1 or self.resample_every < 1:
            raise ValueError("training.lr_decay_every and training.resample_every must be >= 1")
        if self.minibatch < 0:
            raise ValueError("training.minibatch must be >= 0")

    def lr_at(self, epoch: int) -> float:
        return self.learning_rate * self.lr_decay ** (epoch // self.lr_decay_every)


@dataclass(frozen=True)
class WindowSchedule:
    t_total: float = 8.0
    dt_window: float = 2.0

    def __post_init__(self):
        if not self.dt_window > 0:
            raise ValueError("schedule.dt_window must be > 0")
        if not self.t_total > 0:
            raise ValueError("schedule.t_total must be > 0")
        n = self.t_total / self.dt_window
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError("schedule.t_total must be a whole multiple of schedule.dt_window")

    @property
    def n_windows(self) -> int:
        return int(round(self.t_total / self.dt_window))

    @property
    def windows(self) -> list[tuple[float, float]]:
        n = self.n_windows
        edges = [i * self.dt_window for i in range(n)] + [self.t_total]
        return [(edges[i], edges[i + 1]) for i in range(n)]


@dataclass(frozen=True)
class SamplingSettings:
    n_interior: int = 20000
    n_boundary_per_edge: int = 1000
    n_initial: int = 2000
    method: str = "uniform"

    def __post_init__(self):
        if min(self.n_interior, self.n_boundary_per_edge, self.n_initial) < 1:
            raise ValueError("sampling counts must be > 0")
        if self.method not in ("uniform", "sobol", "halton"):
            raise ValueError(f"sampling.method must be uniform, sobol or halton, got {self.method!r}")


@dataclass(frozen=True)
class NetworkSettings:
    hidden_layers: int = 9
    hidden_width: int = 128
    output_scale: float = 500.0
    output_offset: float = 298.0
    window_time_normalization: bool = True
    # inputs are mapped onto [-g, g] with g = input_gain per (x, y, t)
    input_gain: tuple[float, float, float] = (1.0, 1.0, 1.0)
    # scales the Glorot output-layer weights at initialization
    output_init_gain: float = 1.0

    @property
    def arch(self) -> Architecture:
        return Architecture(self.hidden_layers, self.hidden_width)

    def __post_init__(self):
        self.arch  # validates the layer counts
        if self.output_scale == 0:
            raise ValueError("network.output_scale must be nonzero")


@dataclass(frozen=True)
class BoundarySettings:
    initial_temperature: float = 298.0
    # multiplies every Neumann flux value (+1: k grad(u).n = q)
    neumann_sign: float = 1.0

    def __post_init__(self):
        if self.neumann_sign not in (1.0, -1.0):
            raise ValueError("boundary.neumann_sign must be +1 or -1")


@dataclass(frozen=True)
class FemSettings:
    h: float = 0.25
    dt: float = 0.1
    t_end: float | None = None   # defaults to schedule.t_total
    tol: float = 1e-10
    lumped_mass: bool = False

    def __post_init__(self):
        if not self.h > 0 or not self.dt > 0:
            raise ValueError("fem.h and fem.dt must be > 0")
        if not self.tol > 0:
            raise ValueError("fem.tol must be > 0")


@dataclass(frozen=True)
class OutputSettings:
    profile_points: int = 201
    probe_nx: int = 41
    probe_ny: int = 21
    times: tuple[float, ...] = (2.0, 4.0, 6.0, 8.0)


@dataclass(frozen=True)
class SimulationConfig:
    domain: DomainSpec = field(default_factory=DomainSpec)
    material: MaterialProps = field(default_factory=MaterialProps)
    source: SourceSpec = field(default_factory=SourceSpec)
    boundary: BoundarySettings = field(default_factory=BoundarySettings)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    network: NetworkSettings = field(default_factory=NetworkSettings)
    training: TrainHyper = field(default_factory=TrainHyper)
    schedule: WindowSchedule = field(default_factory=WindowSchedule)
    sampling: SamplingSettings = field(default_factory=SamplingSettings)
    fem: FemSettings = field(default_factory=FemSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    seed: int = 0

    @property
    def neumann_flux(self) -> dict:
        """Signed Neumann flux density per edge."""
        return {e: self.boundary.neumann_sign * q for e, q in self.domain.neumann_flux.items()}

    @property
    def fem_t_end(self) -> float:
        return self.schedule.t_total if self.fem.t_end is None else self.fem.t_end

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def replace(self, **sections) -> "SimulationConfig":
        return dataclasses.replace(self, **sections)

    def hash(self) -> str:
        """Stable hash of everything except the seed."""
        d = self.to_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


SECTIONS = {
    "domain": DomainSpec, "material": MaterialProps, "source": SourceSpec,
    "boundary": BoundarySettings, "loss_weights": LossWeights, "network": NetworkSettings,
    "training": TrainHyper, "schedule": WindowSchedule, "sampling": SamplingSettings,
    "fem": FemSettings, "output": OutputSettings,
}
REQUIRED_SECTIONS = ("domain", "material", "source")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def _build_section(name: str, raw: Any):
    cls = SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"[{name}]: unknown keys {sorted(unknown)}")
    kwargs = {}
    for k, v in raw.items():
        kwargs[k] = dict(v) if k == "neumann_flux" else _tuplify(v)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def config_from_dict(raw: dict) -> SimulationConfig:
    raw = dict(raw)
    unknown = set(raw) - set(SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    for name in REQUIRED_SECTIONS:
        if name not in raw:
            raise ConfigError(f"missing required section [{name}]")
    kwargs = {name: _build_section(name, raw[name]) for name in SECTIONS if name in raw}
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    return SimulationConfig(**kwargs, seed=seed)


def parse_config(source) -> SimulationConfig:
    """Read a TOML config file (path or bundled profile name such as ``desk``)."""
    path = Path(source)
    if path.is_file():
        text = path.read_text()
    else:
        name = str(source) if str(source).endswith(".toml") else f"{source}.toml"
        res = resources.files("pinnheat.profiles").joinpath(name)
        if not res.is_file():
            raise ConfigError(f"no config file or bundled profile named {source!r}")
        text = res.read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return config_from_dict(raw)


def _coerce(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: SimulationConfig, overrides) -> SimulationConfig:
    """Apply ``section.key=value`` strings (values in TOML syntax)."""
    raw = cfg.to_dict()
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        target = raw
        for p in parts[:-1]:
            if p not in target or not isinstance(target[p], dict):
                raise ConfigError(f"override {key!r}: unknown section {p!r}")
            target = target[p]
        target[parts[-1]] = _coerce(value.strip())
    return config_from_dict(raw)


def dump_toml(cfg: SimulationConfig) -> str:
    """Serialize a config back to TOML text (round-trips through ``parse_config``)."""
    lines = []
    d = cfg.to_dict()
    lines.append(f"seed = {d.pop('seed')}")
    for section, values in d.items():
        lines.append("")
        lines.append(f"[{section}]")
        nested = []
        for k, v in values.items():
            if v is None:
                continue
            if isinstance(v, dict):
                nested.append((k, v))
            else:
                lines.append(f"{k} = {_toml_value(v)}")
        for k, v in nested:
            lines.append("")
            lines.append(f"[{section}.{k}]")
            for kk, vv in v.items():
                lines.append(f"{kk} = {_toml_value(vv)}")
    return "\n".join(lines) + "\n"


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)
