"""Experiment configuration: one JSON document holding every sub-config."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .env import EnvConfig
from .forest import ForestConfig
from .kinematics import KinematicsConfig
from .lidar import LidarConfig
from .ppo.config import PpoConfig


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "kinematics": KinematicsConfig,
    "forest": ForestConfig,
    "lidar": LidarConfig,
    "env": EnvConfig,
    "ppo": PpoConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    kinematics: KinematicsConfig = field(default_factory=KinematicsConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    seed: int = 0
    out_dir: str = "runs/default"

    def __post_init__(self) -> None:
        if self.lidar.beam_count % self.env.obs_bins:
            raise ConfigError(
                f"env.obs_bins={self.env.obs_bins} must divide lidar.beam_count={self.lidar.beam_count}"
            )
        reach = self.lidar.max_range + self.forest.max_radius
        if self.forest.cell_side < reach:
            raise ConfigError(
                f"forest.cell_side={self.forest.cell_side} must be >= lidar.max_range + max tree radius = {reach}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in an unsigned 64-bit integer, got {self.seed}")

    def to_dict(self) -> dict[str, Any]:
        def plain(obj):
            d = dataclasses.asdict(obj)
            return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

        out: dict[str, Any] = {name: plain(getattr(self, name)) for name in _SECTIONS}
        out["seed"] = self.seed
        out["out_dir"] = self.out_dir
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = set(data) - set(_SECTIONS) - {"seed", "out_dir"}
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        kwargs: dict[str, Any] = {}
        for name, section_cls in _SECTIONS.items():
            section = data.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"config field '{name}' must be an object")
            known = {f.name for f in dataclasses.fields(section_cls)}
            bad = set(section) - known
            if bad:
                raise ConfigError(f"unknown config field(s): {', '.join(f'{name}.{b}' for b in sorted(bad))}")
            try:
                kwargs[name] = section_cls(**section)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid '{name}' section: {exc}") from exc
        if "seed" in data:
            if not isinstance(data["seed"], int) or isinstance(data["seed"], bool):
                raise ConfigError(f"seed must be an integer, got {data['seed']!r}")
            kwargs["seed"] = data["seed"]
        if "out_dir" in data:
            kwargs["out_dir"] = str(data["out_dir"])
        return cls(**kwargs)

    def with_overrides(self, **changes: Any) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return ExperimentConfig.from_dict(data)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def bundled_config(name: str) -> ExperimentConfig:
    """One of the configs shipped in ``forestnav/configs`` (``default``, ``smoke``, ``reference``)."""
    text = resources.files("forestnav").joinpath("configs", f"{name}.json").read_text()
    return ExperimentConfig.from_dict(json.loads(text))
