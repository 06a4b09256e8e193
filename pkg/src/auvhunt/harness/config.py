"""Run configuration: one JSON-serializable tree for every stage.

The defaults mirror the reference parameter table (hunter/target speeds
and accelerations, radii, reward weights, transmit/jam powers, diffusion
steps, learning rate, batch size, discount, return scale, horizon) plus
the documented reproducibility choices (dt, channel uses, h_max, r_min,
spreading factor, schedule shape, guidance).  Parsing is strict: unknown
keys are rejected and every error names the offending path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..acoustics import ChannelParams
from ..amadp.train import TrainConfig
from ..covert import CovertParams
from ..environment import EpisodeConfig
from ..kinematics import Arena

__all__ = ["ConfigError", "DataSection", "ExecuteSection", "RunConfig",
           "config_from_dict", "config_to_dict", "load_config", "save_config",
           "config_hash", "desk_run_config"]


class ConfigError(ValueError):
    """Configuration rejected; the message carries the path to the field."""


@dataclass(frozen=True)
class DataSection:
    """Offline dataset generation settings."""

    n_episodes: int = 500
    mix_pursuit: float = 0.4
    mix_encircle: float = 0.4
    mix_noisy: float = 0.2
    noisy_epsilon: float = 0.5
    discount: float = 0.9
    return_scale: float = 3000.0
    horizon: int = 40

    def __post_init__(self):
        if self.n_episodes < 1:
            raise ValueError("n_episodes must be >= 1")
        if min(self.mix_pursuit, self.mix_encircle, self.mix_noisy) < 0:
            raise ValueError("mixture weights must be non-negative")
        if self.mix_pursuit + self.mix_encircle + self.mix_noisy <= 0:
            raise ValueError("mixture weights must not all be zero")
        if not 0 <= self.discount <= 1:
            raise ValueError("discount must be in [0, 1]")
        if self.return_scale <= 0:
            raise ValueError("return_scale must be positive")
        if self.horizon < 8:
            raise ValueError("horizon must be at least 8")

    def mix(self) -> dict[str, float]:
        return {
            "pursuit": self.mix_pursuit,
            "encircle": self.mix_encircle,
            "noisy": self.mix_noisy,
        }


@dataclass(frozen=True)
class ExecuteSection:
    """Evaluation-time behavior of the trained policy."""

    replan_interval: int = 1
    target_return: float | None = None
    eval_episodes: int = 50

    def __post_init__(self):
        if self.replan_interval < 1:
            raise ValueError("replan_interval must be >= 1")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    root_seed: int = 0
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    data: DataSection = field(default_factory=DataSection)
    training: TrainConfig = field(default_factory=TrainConfig)
    execute: ExecuteSection = field(default_factory=ExecuteSection)


_SCALARS = {int, float, bool, str}


def _coerce(value, hint, path: str):
    origin = typing.get_origin(hint)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(hint)
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(f"{path}: null is not allowed here")
        non_none = [a for a in args if a is not type(None)]
        if len(non_none) != 1:
            raise ConfigError(f"{path}: unsupported union type {hint}")
        return _coerce(value, non_none[0], path)
    if origin is tuple:
        args = typing.get_args(hint)
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], f"{path}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{path}: expected {len(args)} entries, got {len(value)}")
        return tuple(_coerce(v, a, f"{path}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
        return _from_dict(hint, value, path)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {type(value).__name__}")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {type(value).__name__}")
        return value
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {type(value).__name__}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {type(value).__name__}")
        return value
    raise ConfigError(f"{path}: unsupported config field type {hint}")


def _from_dict(cls, d: dict, path: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown key(s) {sorted(where + k for k in unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in d:
            sub = f"{path}.{f.name}" if path else f.name
            kwargs[f.name] = _coerce(d[f.name], hints[f.name], sub)
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise ConfigError(f"{path or 'config'}: {e}") from e


def _to_jsonable(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, tuple):
        return [_to_jsonable(v) for v in value]
    return value


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("top-level config must be an object")
    return _from_dict(RunConfig, d, "")


def config_to_dict(cfg: RunConfig) -> dict:
    return _to_jsonable(cfg)


def load_config(path: str | Path | None) -> RunConfig:
    """Read a JSON config file; None gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    return config_from_dict(data)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")


def dumps_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True, indent=1) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """Short stable digest of the canonical config JSON."""
    return hashlib.sha256(dumps_config(cfg).encode("utf-8")).hexdigest()[:12]


def desk_run_config(root_seed: int = 0) -> RunConfig:
    """Desk-scale preset: a 600 m arena, short episodes, small corpus and
    a 5000-step training run that fits in CPU minutes."""
    return RunConfig(
        root_seed=root_seed,
        episode=EpisodeConfig(
            arena=Arena(600.0, 600.0, -200.0, 10.0),
            start_xy=(300.0, 300.0),
            h_max_steps=200,
            n_obstacles=2,
            obstacle_radius_min=30.0,
            obstacle_radius_max=60.0,
            target_spawn_max_dist=320.0,
            channel=ChannelParams(),
            covert=CovertParams(),
        ),
        data=DataSection(n_episodes=200),
        training=TrainConfig(steps=5000, checkpoint_every=1000),
        execute=ExecuteSection(replan_interval=5, eval_episodes=100),
    )
