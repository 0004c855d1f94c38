"""Experiment configuration: file loading, defaults and grid expansion."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .model import ModelConfig
from .sampling import SAMPLE_MULTIPLIERS
from .training import TrainConfig

log = logging.getLogger(__name__)


def _default_grid() -> dict[str, list[int]]:
    return {"e": [30, 60], "h": [1, 2, 3], "L": [1, 2]}


@dataclass
class ExperimentConfig:
    dims: list[int] = field(default_factory=lambda: [3, 20])
    instances_per_class: int = 100
    multipliers: list[int] = field(default_factory=lambda: [50])
    grid: dict[str, list[int]] = field(default_factory=_default_grid)
    train: dict = field(default_factory=dict)
    seed: int = 0
    out: str = "runs"

    def __post_init__(self):
        if self.instances_per_class < 1:
            raise ConfigError(f"instances_per_class must be >= 1, got {self.instances_per_class}")
        for d in self.dims:
            if int(d) < 2:
                raise ConfigError(f"dims entries must be >= 2, got {d}")
        for m in self.multipliers:
            if m not in SAMPLE_MULTIPLIERS:
                raise ConfigError(f"multipliers must be drawn from {SAMPLE_MULTIPLIERS}, got {m}")
        unknown = set(self.grid) - {"e", "h", "L"}
        if unknown:
            raise ConfigError(f"unknown grid keys {sorted(unknown)}; expected e, h, L")
        self.grid = {**_default_grid(), **{k: list(v) for k, v in self.grid.items()}}
        train_keys = {f.name for f in fields(TrainConfig)} - {"seed"}
        bad = set(self.train) - train_keys
        if bad:
            raise ConfigError(f"unknown train override keys {sorted(bad)}")
        self.train_config()  # validates the overrides

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            doc = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(**{**self.train, "seed": self.seed})
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def points(self) -> list[tuple[int, int, int, int, int]]:
        """Valid ``(dim, multiplier, e, h, L)`` points, sorted; invalid (e, h) pairs are logged and skipped."""
        pairs = []
        for e, h in itertools.product(self.grid["e"], self.grid["h"]):
            if e % h:
                log.warning("skipping e=%d h=%d: embedding size not divisible by head count", e, h)
            else:
                pairs.append((int(e), int(h)))
        pts = [
            (int(dim), int(m), e, h, int(L))
            for dim, m, (e, h), L in itertools.product(self.dims, self.multipliers, pairs, self.grid["L"])
        ]
        return sorted(set(pts))


def model_config(dim: int, e: int, h: int, L: int) -> ModelConfig:
    return ModelConfig(d=dim, e=e, h=h, L=L)
