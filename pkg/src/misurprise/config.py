"""Experiment configuration: nested dataclasses loaded from a YAML document.

Every knob of the benchmark appears here with its default so a config file
that overrides something shows up as a visible diff.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

EXPERIMENTS = ("synthetic", "pollution", "two_phase", "std_check")
STRATEGIES = ("sr_shannon", "sr_postdictive", "sce", "gsqbc")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FieldSettings:
    grid_size: int = 50
    n_frames: int = 450
    dt: float = 0.01
    velocity: tuple[float, float] = (1.0, 0.0)
    diffusion: tuple[float, float] = (0.01, 2.0)
    decay: float = 2.0
    base_mean: float = 2.0
    base_std: float = 0.25
    source_amplitude: float = 500.0
    source_radius: float = 1.5
    source_interval: int = 50
    initial_sources: int = 3
    spinup_frames: int = 0
    switch_frame: int = 250
    two_phase_frames: int = 300
    stationary_decay: float = 0.1


@dataclass(frozen=True)
class GpSettings:
    noise_variance: float = 1e-2
    # None = a tenth of the domain diameter
    length_scale: float | None = None
    committee_bandwidth: float = 0.1


@dataclass(frozen=True)
class SrSettings:
    exploit_limit: int = 3
    radius_cells: float = 2.0
    shannon_threshold: float = 1.3
    postdictive_threshold: float = 0.5


@dataclass(frozen=True)
class AcquisitionSettings:
    eta: float = 0.5


@dataclass(frozen=True)
class PolicySettings:
    reflection_threshold: int = 20
    rho: float = 0.1
    regime: str = "auto"
    y_bins: int = 100
    # side length, in grid cells, of the square blocks used as input categories
    x_block: int = 1
    suppress_frames: int = 2
    y_range: str = "frozen"


@dataclass(frozen=True)
class SyntheticSettings:
    scenarios: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    steps: int = 100
    gp_noise: float = 0.1
    length_scale: float = 3.0


@dataclass(frozen=True)
class StdCheckSettings:
    n_pmfs: int = 100
    runs: int = 10
    n_max: int = 3000
    support: int = 100
    n_points: int = 60


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "pollution"
    strategy: str = "sr_shannon"
    governed: bool = False
    budget_per_frame: int = 10
    initial_locations: int = 10
    memory_buffer: int = 200
    monte_carlo_runs: int = 10
    seeds: tuple[int, ...] | None = None
    field: FieldSettings = dataclasses.field(default_factory=FieldSettings)
    gp: GpSettings = dataclasses.field(default_factory=GpSettings)
    sr: SrSettings = dataclasses.field(default_factory=SrSettings)
    acquisition: AcquisitionSettings = dataclasses.field(default_factory=AcquisitionSettings)
    policy: PolicySettings = dataclasses.field(default_factory=PolicySettings)
    synthetic: SyntheticSettings = dataclasses.field(default_factory=SyntheticSettings)
    std_check: StdCheckSettings = dataclasses.field(default_factory=StdCheckSettings)

    def __post_init__(self):
        validate(self)

    @property
    def grid_cells(self) -> int:
        return self.field.grid_size ** 2

    @property
    def run_seeds(self) -> tuple[int, ...]:
        return tuple(self.seeds) if self.seeds is not None else tuple(range(self.monte_carlo_runs))

    def with_(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _check(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def validate(c: ExperimentConfig) -> None:
    _check(c.experiment in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}")
    _check(c.strategy in STRATEGIES, "strategy", f"must be one of {STRATEGIES}")
    for name in ("budget_per_frame", "initial_locations", "memory_buffer", "monte_carlo_runs"):
        _check(getattr(c, name) > 0, name, "must be positive")
    _check(c.initial_locations <= c.memory_buffer, "initial_locations",
           "cannot exceed memory_buffer")
    if c.seeds is not None:
        _check(len(c.seeds) > 0, "seeds", "must not be empty")
    f = c.field
    _check(f.grid_size >= 2, "field.grid_size", "must be >= 2")
    _check(f.n_frames > 0 and f.two_phase_frames > 0, "field.n_frames", "must be positive")
    _check(0 < f.switch_frame < f.two_phase_frames, "field.switch_frame",
           "must fall inside the two-phase run")
    _check(f.dt > 0, "field.dt", "must be positive")
    _check(min(f.diffusion) >= 0, "field.diffusion", "must be non-negative")
    _check(f.decay >= 0 and f.stationary_decay >= 0, "field.decay", "must be non-negative")
    _check(f.source_amplitude > 0 and f.source_radius > 0, "field.source_amplitude",
           "sources need positive amplitude and radius")
    _check(f.source_interval > 0, "field.source_interval", "must be positive")
    _check(c.grid_cells >= c.initial_locations, "initial_locations",
           "cannot exceed the number of grid cells")
    _check(c.gp.noise_variance > 0, "gp.noise_variance", "must be positive")
    _check(c.gp.length_scale is None or c.gp.length_scale > 0, "gp.length_scale",
           "must be positive")
    _check(c.gp.committee_bandwidth > 0, "gp.committee_bandwidth", "must be positive")
    _check(c.sr.exploit_limit >= 1, "sr.exploit_limit", "must be >= 1")
    _check(c.sr.radius_cells > 0, "sr.radius_cells", "must be positive")
    _check(0.0 <= c.acquisition.eta <= 1.0, "acquisition.eta", "must lie in [0, 1]")
    p = c.policy
    _check(p.reflection_threshold >= 2, "policy.reflection_threshold", "must be >= 2")
    _check(0 < p.rho < 1, "policy.rho", "must lie in (0, 1)")
    _check(p.regime in ("auto", "undersampled", "oversampled"), "policy.regime",
           "must be auto, undersampled or oversampled")
    _check(p.y_bins >= 1, "policy.y_bins", "must be positive")
    _check(p.x_block >= 1 and f.grid_size % p.x_block == 0, "policy.x_block",
           "must be a positive divisor of field.grid_size")
    _check(p.suppress_frames >= 0, "policy.suppress_frames", "must be non-negative")
    _check(p.y_range in ("frozen", "buffer"), "policy.y_range", "must be frozen or buffer")
    s = c.std_check
    _check(min(s.n_pmfs, s.runs, s.support, s.n_points) >= 1 and s.runs >= 2,
           "std_check", "counts must be positive and runs >= 2")
    _check(s.n_max >= 50, "std_check.n_max", "must be >= 50")
    _check(all(1 <= i <= 6 for i in c.synthetic.scenarios), "synthetic.scenarios",
           "ids must be 1..6")


def _build(cls, data: Any, path: str):
    if not dataclasses.is_dataclass(cls):
        return data
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for key, value in data.items():
        p = f"{path}.{key}" if path else key
        if key not in fields:
            raise ConfigError(f"{p}: unknown key")
        sub = _SECTIONS.get(key) if cls is ExperimentConfig else None
        if sub is not None:
            kw[key] = _build(sub, value, p)
        else:
            kw[key] = tuple(value) if isinstance(value, list) else value
    try:
        return cls(**kw)
    except TypeError as e:
        raise ConfigError(f"{path or 'config'}: {e}") from e


_SECTIONS = {"field": FieldSettings, "gp": GpSettings, "sr": SrSettings,
             "acquisition": AcquisitionSettings, "policy": PolicySettings,
             "synthetic": SyntheticSettings, "std_check": StdCheckSettings}


def from_dict(data: dict | None) -> ExperimentConfig:
    return _build(ExperimentConfig, data or {}, "")


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: not valid YAML: {e}") from e
    return from_dict(data)


def to_dict(cfg: ExperimentConfig) -> dict:
    def plain(v):
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        if isinstance(v, float) and math.isinf(v):
            return str(v)
        return v
    out = {}
    for k, v in dataclasses.asdict(cfg).items():
        out[k] = {a: plain(b) for a, b in v.items()} if isinstance(v, dict) else plain(v)
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
