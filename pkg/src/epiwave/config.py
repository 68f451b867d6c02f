"""Pipeline configuration: one TOML file plus ``section.key=value`` overrides."""

from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .data import parse_date
from .errors import ConfigError
from .filtering import ObsModel
from .sir import NoiseConfig


@dataclass
class DataConfig:
    path: str = ""
    region: str = "US"
    population: float = 0.0
    recovered_path: str = ""
    deaths_path: str = ""
    start_date: str = ""          # first day of the analysed series
    end_date: str = ""


@dataclass
class SmoothingConfig:
    display_window: int = 21
    detector_window: int = 7


@dataclass
class DetectorConfig:
    sigma_window: int = 20
    risk: float = 1e-4            # one false alarm every ~27 years
    denom_floor: float = 1.0
    start_date: str = ""          # first day of MAST monitoring
    initial_regime: str = "controlled"
    calibration_trials: int = 1000
    calibration_sigma: float = 0.0   # 0: median of the estimated sigma sequence


@dataclass
class FilterConfig:
    particles: int = 5000
    state_noise_std: float = 0.0
    flow_noise_rel: float = 0.02
    beta_walk_std: float = 0.002
    gamma_walk_std: float = 0.0005
    jump_prob: float = 0.01
    jump_scale: float = 25.0
    obs_infected_std: float = 0.05
    obs_removed_std: float = 0.05
    obs_relative: bool = True
    obs_floor: float = 10.0
    prior_beta: list = field(default_factory=lambda: [0.01, 1.0])
    prior_gamma: list = field(default_factory=lambda: [0.01, 0.5])
    prior_spread: float = 0.1

    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.state_noise_std, self.beta_walk_std, self.gamma_walk_std,
                           self.flow_noise_rel, self.jump_prob, self.jump_scale)

    def obs_model(self) -> ObsModel:
        return ObsModel(self.obs_infected_std, self.obs_removed_std, self.obs_relative,
                        self.obs_floor)


@dataclass
class ForecastConfig:
    rise_days: int = 15
    fall_days: int = 30
    horizons: list = field(default_factory=lambda: [14, 28, 56])
    stride: int = 1
    process_noise: bool = True


@dataclass
class PipelineConfig:
    seed: int | None = None
    data: DataConfig = field(default_factory=DataConfig)
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)

    def validate(self) -> "PipelineConfig":
        if self.seed is None:
            raise ConfigError("a seed is required")
        if self.smoothing.display_window < 1 or self.smoothing.detector_window < 1:
            raise ConfigError("smoothing windows must be >= 1")
        if self.detector.sigma_window < 2:
            raise ConfigError("sigma window must be >= 2")
        if not 0 < self.detector.risk < 1:
            raise ConfigError("risk must be in (0, 1)")
        if self.detector.initial_regime not in ("controlled", "critical"):
            raise ConfigError(f"unknown initial regime {self.detector.initial_regime!r}")
        if self.filter.particles < 2:
            raise ConfigError("particles must be >= 2")
        if not self.forecast.horizons:
            raise ConfigError("forecast horizons must not be empty")
        if any(int(h) < 1 for h in self.forecast.horizons):
            raise ConfigError("forecast horizons must be >= 1")
        if self.forecast.stride < 1:
            raise ConfigError("stride must be >= 1")
        for name in ("start_date", "end_date"):
            _opt_date(getattr(self.data, name), f"data.{name}")
        _opt_date(self.detector.start_date, "detector.start_date")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _opt_date(text: str, where: str) -> date | None:
    if not text:
        return None
    try:
        return parse_date(text)
    except ValueError:
        raise ConfigError(f"{where}: bad date {text!r}") from None


def _coerce(value: Any, current: Any, where: str):
    if isinstance(current, bool):
        if isinstance(value, str):
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return bool(value)
    try:
        if isinstance(current, int) and not isinstance(current, bool):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(current, float):
            return float(value)
        if isinstance(current, list):
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            return [type(current[0])(v) if current else v for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot use {value!r}") from None
    return value


def _apply(cfg: PipelineConfig, section: str, key: str | None, value: Any) -> None:
    if key is None:
        if section != "seed":
            raise ConfigError(f"unknown top-level key {section!r}")
        try:
            cfg.seed = int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"seed must be an integer, got {value!r}") from None
        return
    sub = getattr(cfg, section, None)
    if sub is None or not dataclasses.is_dataclass(sub):
        raise ConfigError(f"unknown config section {section!r}")
    if key not in {f.name for f in dataclasses.fields(sub)}:
        raise ConfigError(f"unknown config key {section}.{key}")
    setattr(sub, key, _coerce(value, getattr(sub, key), f"{section}.{key}"))


def from_mapping(tree: dict, overrides: list[str] | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    for k, v in tree.items():
        if isinstance(v, dict):
            for kk, vv in v.items():
                _apply(cfg, k, kk, vv)
        else:
            _apply(cfg, k, None, v)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, rhs = item.split("=", 1)
        parts = lhs.strip().split(".")
        if len(parts) == 1:
            _apply(cfg, parts[0], None, rhs)
        elif len(parts) == 2:
            _apply(cfg, parts[0], parts[1], rhs)
        else:
            raise ConfigError(f"bad override key {lhs!r}")
    return cfg


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> PipelineConfig:
    tree = {}
    if path:
        try:
            with open(path, "rb") as fh:
                tree = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from None
        base = Path(path).parent
        data = tree.get("data", {})
        for key in ("path", "recovered_path", "deaths_path"):
            if data.get(key) and not Path(data[key]).is_absolute():
                data[key] = str(base / data[key])
    return from_mapping(tree, overrides).validate()


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent generator for a named pipeline stage (and optional indices)."""
    entropy = [int(seed), zlib.crc32(name.encode())] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def seed_for(seed: int, name: str) -> int:
    return int(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]).generate_state(1)[0])
