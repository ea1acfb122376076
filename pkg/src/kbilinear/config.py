"""YAML experiment configuration with strict key checking."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .dataset import DEFAULT_FILL_RESOLUTION, DEFAULT_SIGMA_THRESHOLD
from .errors import ConfigError


@dataclass
class KernelSection:
    n: int = 1
    s: int = 1
    scale: float = 1.0


@dataclass
class SamplingSection:
    dt: float = 0.01
    substeps: int = 100


@dataclass
class DataSection:
    d: int = 9
    d_j: int = 2
    seed: int = 0
    sigma_threshold: float = DEFAULT_SIGMA_THRESHOLD
    fill_resolution: int = DEFAULT_FILL_RESOLUTION


@dataclass
class BoundsSection:
    C1: float = 1.0
    C2: float = 1.0
    h0: float | None = None


@dataclass
class BenchmarkSection:
    d_list: list = field(default_factory=lambda: [5, 7, 9, 11, 13, 15, 17, 19])
    horizon: int = 100
    realizations: int = 20


@dataclass
class ScalingSection:
    d: int = 9
    dt_list: list = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    d_list: list = field(default_factory=lambda: [5, 9, 17])
    dt_fill: float = 0.005
    grid_x: int = 101
    grid_u: int = 21


_SECTIONS = {
    "kernel": KernelSection,
    "sampling": SamplingSection,
    "data": DataSection,
    "bounds": BoundsSection,
    "benchmark": BenchmarkSection,
    "scaling": ScalingSection,
}


@dataclass
class ExperimentConfig:
    system: str = "zone_temp"
    kernel: KernelSection = field(default_factory=KernelSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    data: DataSection = field(default_factory=DataSection)
    bounds: BoundsSection = field(default_factory=BoundsSection)
    benchmark: BenchmarkSection = field(default_factory=BenchmarkSection)
    scaling: ScalingSection = field(default_factory=ScalingSection)
    out: str = "out"

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "ExperimentConfig":
        def positive(name, value):
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")

        positive("sampling.dt", self.sampling.dt)
        positive("sampling.substeps", self.sampling.substeps)
        positive("kernel.scale", self.kernel.scale)
        positive("benchmark.horizon", self.benchmark.horizon)
        positive("benchmark.realizations", self.benchmark.realizations)
        positive("scaling.dt_fill", self.scaling.dt_fill)
        for dt in self.scaling.dt_list:
            positive("scaling.dt_list entry", dt)
        for name, ds in (("benchmark.d_list", self.benchmark.d_list), ("scaling.d_list", self.scaling.d_list)):
            if not ds:
                raise ConfigError(f"{name} is empty")
            for d in ds:
                if int(d) != d or d < 2:
                    raise ConfigError(f"{name} entries must be integers >= 2, got {d}")
        if self.data.d < 2:
            raise ConfigError(f"data.d must be >= 2, got {self.data.d}")
        if self.bounds.C1 < 0 or self.bounds.C2 < 0:
            raise ConfigError("bounds.C1 and bounds.C2 must be nonnegative")
        return self


def _section(cls, raw, where: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {', '.join(unknown)}")
    return cls(**raw)


def from_dict(raw: dict | None) -> ExperimentConfig:
    raw = dict(raw or {})
    top = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - top)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(unknown)}")
    kw = {name: _section(cls, raw.get(name), name) for name, cls in _SECTIONS.items()}
    if "system" in raw:
        kw["system"] = str(raw["system"])
    if "out" in raw:
        kw["out"] = str(raw["out"])
    try:
        return ExperimentConfig(**kw).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    with open(Path(path)) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return from_dict(raw)


def dump_defaults() -> str:
    return yaml.safe_dump(ExperimentConfig().to_dict(), sort_keys=False)
