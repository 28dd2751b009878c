"""Pipeline configuration: JSON file, dotted-flag overrides, validation.

A config file is a JSON object with ``paths``, ``cohort``, ``dataset``,
``logit``, and ``mlp`` sections plus the top-level ``target_mode``; any
field can be overridden on the command line with its dotted name,
e.g. ``--mlp.epochs 250``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError

ENV_CONFIG_VAR = "PRICEDIR_CONFIG"

TARGET_DIRECTION = "direction"
TARGET_MEMBERSHIP = "membership"


@dataclass
class PathsConfig:
    membership_dir: str = "data/membership"
    panels_dir: str = "data/panels"
    output_dir: str = "out"


@dataclass
class CohortConfig:
    per_group: int = 10
    seed: int = 20020104


@dataclass
class DatasetConfig:
    price_column: str = "price"
    lag_features: list[str] = field(default_factory=lambda: ["total_return"])
    max_missing_fraction: float = 0.5
    train_fraction: float = 0.8


@dataclass
class LogitConfig:
    alpha: float = 0.05
    tol: float = 1e-8
    max_iter: int = 100


@dataclass
class MlpConfig:
    hidden_sizes: list[int] = field(default_factory=lambda: [8])
    epochs: int = 500
    learning_rate: float = 0.1
    batch_size: int = 32
    seed: int = 8451
    threshold: float = 0.5


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    cohort: CohortConfig = field(default_factory=CohortConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    logit: LogitConfig = field(default_factory=LogitConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    target_mode: str = TARGET_DIRECTION
    tickers: Optional[list[str]] = None
    workers: int = 1

    def validate(self) -> "PipelineConfig":
        ds = self.dataset
        if not 0.0 < ds.train_fraction < 1.0:
            raise ConfigError("dataset.train_fraction must be in (0, 1)")
        if not 0.0 <= ds.max_missing_fraction <= 1.0:
            raise ConfigError("dataset.max_missing_fraction must be in [0, 1]")
        if not 0.0 < self.logit.alpha <= 1.0:
            raise ConfigError("logit.alpha must be in (0, 1]")
        if self.logit.max_iter < 1 or self.logit.tol <= 0:
            raise ConfigError("logit.max_iter must be >= 1 and logit.tol > 0")
        mlp = self.mlp
        if not 0.0 < mlp.threshold < 1.0:
            raise ConfigError("mlp.threshold must be in (0, 1)")
        if mlp.epochs < 1 or mlp.batch_size < 1 or mlp.learning_rate < 0:
            raise ConfigError("mlp.epochs/batch_size must be >= 1, learning_rate >= 0")
        if any(h < 1 for h in mlp.hidden_sizes):
            raise ConfigError("mlp.hidden_sizes must all be >= 1")
        if self.cohort.per_group < 1:
            raise ConfigError("cohort.per_group must be >= 1")
        if self.target_mode not in (TARGET_DIRECTION, TARGET_MEMBERSHIP):
            raise ConfigError(
                f"target_mode must be '{TARGET_DIRECTION}' or '{TARGET_MEMBERSHIP}'"
            )
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        paths = [self.paths.membership_dir, self.paths.panels_dir, self.paths.output_dir]
        if len({str(Path(p)) for p in paths}) != len(paths):
            raise ConfigError("membership_dir, panels_dir, output_dir must be distinct")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "paths": PathsConfig,
    "cohort": CohortConfig,
    "dataset": DatasetConfig,
    "logit": LogitConfig,
    "mlp": MlpConfig,
}


def config_from_dict(data: dict) -> PipelineConfig:
    """Build a config from a JSON-style dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            known = {f.name for f in dataclasses.fields(cls)}
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            unknown = set(value) - known
            if unknown:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(unknown)}")
            kwargs[key] = cls(**value)
        elif key in ("target_mode", "tickers", "workers"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return PipelineConfig(**kwargs)


def load_config(path: str | Path) -> PipelineConfig:
    """Load and validate a JSON config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data).validate()


def _coerce(current, text: str):
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"cannot parse boolean from {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, list):
        parsed = json.loads(text) if text.startswith("[") else text.split(",")
        if current and isinstance(current[0], int):
            return [int(v) for v in parsed]
        return [str(v).strip() for v in parsed]
    return text


def apply_overrides(config: PipelineConfig, overrides: dict[str, str]) -> PipelineConfig:
    """Apply ``{"mlp.epochs": "250", ...}`` style dotted overrides in place."""
    for dotted, text in overrides.items():
        parts = dotted.split(".")
        try:
            if len(parts) == 2 and parts[0] in _SECTIONS:
                section = getattr(config, parts[0])
                current = getattr(section, parts[1])
                setattr(section, parts[1], _coerce(current, text))
            elif len(parts) == 1 and hasattr(config, parts[0]):
                current = getattr(config, parts[0])
                if parts[0] == "tickers":
                    setattr(config, "tickers", [t.strip() for t in text.split(",")])
                else:
                    setattr(config, parts[0], _coerce(current, text))
            else:
                raise ConfigError(f"unknown config field {dotted!r}")
        except (ValueError, AttributeError) as exc:
            raise ConfigError(f"bad value for {dotted!r}: {text!r} ({exc})") from exc
    return config
