"""Simulation configuration, config-file I/O and seeded random substreams."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

Matrix2 = tuple[tuple[float, float], tuple[float, float]]


class ConfigError(ValueError):
    """Raised for unreadable config files or invalid parameter values."""

    def __init__(self, key: str | None, message: str) -> None:
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


@dataclass(frozen=True)
class SimConfig:
    """All scenario, learning-plane and agent parameters.

    Durations are in slots, sizes in bytes, rates in bytes/s.  Index 0 of
    the per-slice tuples is slice 1 (deadline-free), index 1 is slice 2
    (hard deadline).
    """

    # communication system
    n_resources: int = 15
    slot_duration: float = 1e-3
    queue_capacity: int = 1500
    packet_size: int = 512
    # traffic
    users: tuple[int, int] = (16, 17)
    user_rate: tuple[float, float] = (512e3, 512e3)
    activity: tuple[Matrix2, Matrix2] = (
        ((0.5, 0.5), (0.92, 0.08)),
        ((0.5, 0.5), (0.5, 0.5)),
    )
    deadline: int = 70
    # learning plane
    gamma: float = 0.95
    learning_queue_capacity: int = 1500
    fragments_per_sample: int = 3
    rho_0: float = 0.2
    rho_f: float = 0.01
    rho_decay: float = 8e-4
    rho_pace: int = 1000
    pressure_threshold: int = 1400
    # agent
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    replay_capacity: int = 100_000
    train_start: int = 1000
    target_sync: int = 1000
    eps_start: float = 1.0
    eps_end: float = 0.02
    eps_decay_slots: int = 200_000
    latency_clip_1: int = 500

    def __post_init__(self) -> None:
        validate(self)

    @property
    def packets_per_user(self) -> tuple[int, int]:
        """Packets emitted per active user per slot, round(R * tau / L)."""
        return tuple(
            round(r * self.slot_duration / self.packet_size) for r in self.user_rate
        )  # type: ignore[return-value]

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def validate(cfg: SimConfig) -> None:
    def need(cond: bool, key: str, msg: str) -> None:
        if not cond:
            raise ConfigError(key, msg)

    need(cfg.n_resources >= 1, "n_resources", "must be >= 1")
    need(cfg.slot_duration > 0, "slot_duration", "must be > 0")
    need(cfg.queue_capacity >= 1, "queue_capacity", "must be >= 1")
    need(cfg.packet_size >= 1, "packet_size", "must be >= 1")
    need(len(cfg.users) == 2 and all(u >= 0 for u in cfg.users), "users", "two counts >= 0")
    need(len(cfg.user_rate) == 2 and all(r > 0 for r in cfg.user_rate), "user_rate", "two rates > 0")
    for m, mat in enumerate(cfg.activity):
        key = f"activity_{m + 1}"
        need(len(mat) == 2 and all(len(row) == 2 for row in mat), key, "must be 2x2")
        for row in mat:
            need(all(0.0 <= p <= 1.0 for p in row), key, "entries must lie in [0, 1]")
            need(abs(sum(row) - 1.0) <= 1e-12, key, "rows must sum to 1")
    for m, ppu in enumerate(cfg.packets_per_user):
        need(ppu >= 1, f"user_rate_{m + 1}", "rate * slot_duration / packet_size must round to >= 1")
    need(cfg.deadline >= 0, "deadline", "must be >= 0")
    need(0.0 <= cfg.gamma < 1.0, "gamma", "must lie in [0, 1)")
    need(cfg.learning_queue_capacity >= 1, "learning_queue_capacity", "must be >= 1")
    need(cfg.fragments_per_sample >= 1, "fragments_per_sample", "must be >= 1")
    need(0.0 <= cfg.rho_0 <= 1.0, "rho_0", "must lie in [0, 1]")
    need(0.0 <= cfg.rho_f <= cfg.rho_0, "rho_f", "must satisfy 0 <= rho_f <= rho_0")
    need(cfg.rho_decay > 0, "rho_decay", "must be > 0")
    need(cfg.rho_pace >= 1, "rho_pace", "must be >= 1")
    need(0 <= cfg.pressure_threshold <= cfg.queue_capacity, "pressure_threshold",
         "must lie in [0, queue_capacity]")
    need(cfg.learning_rate > 0, "learning_rate", "must be > 0")
    need(0.0 <= cfg.adam_beta1 < 1.0, "adam_beta1", "must lie in [0, 1)")
    need(0.0 <= cfg.adam_beta2 < 1.0, "adam_beta2", "must lie in [0, 1)")
    need(cfg.adam_eps > 0, "adam_eps", "must be > 0")
    need(cfg.batch_size >= 1, "batch_size", "must be >= 1")
    need(cfg.replay_capacity >= cfg.batch_size, "replay_capacity", "must be >= batch_size")
    need(cfg.train_start >= 1, "train_start", "must be >= 1")
    need(cfg.target_sync >= 1, "target_sync", "must be >= 1")
    need(0.0 <= cfg.eps_end <= cfg.eps_start <= 1.0, "eps_start",
         "must satisfy 0 <= eps_end <= eps_start <= 1")
    need(cfg.eps_decay_slots >= 1, "eps_decay_slots", "must be >= 1")
    need(cfg.latency_clip_1 >= 1, "latency_clip_1", "must be >= 1")


def default_config() -> SimConfig:
    return SimConfig()


# ---------------------------------------------------------------------------
# flat ``key = value`` text format
#
# Per-slice tuples are flattened into ``<name>_1`` / ``<name>_2`` keys and the
# 2x2 activity matrices are written row-major as four comma-separated numbers.

_SPLIT_FIELDS = ("users", "user_rate", "activity")


def _config_keys() -> dict[str, type]:
    keys: dict[str, type] = {}
    for f in fields(SimConfig):
        if f.name in _SPLIT_FIELDS:
            kind = int if f.name == "users" else (float if f.name == "user_rate" else tuple)
            keys[f"{f.name}_1"] = kind
            keys[f"{f.name}_2"] = kind
        else:
            keys[f.name] = type(getattr(SimConfig(), f.name))
    return keys


CONFIG_KEYS = _config_keys()


def _parse_value(key: str, kind: type, text: str) -> Any:
    try:
        if kind is int:
            value = float(text)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError
        return ((parts[0], parts[1]), (parts[2], parts[3]))
    except ValueError:
        raise ConfigError(key, f"cannot parse value {text!r}") from None


def parse_config(text: str) -> SimConfig:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(None, f"line {lineno}: expected 'key = value'")
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in CONFIG_KEYS:
            raise ConfigError(key, f"unknown key (line {lineno})")
        values[key] = _parse_value(key, CONFIG_KEYS[key], val)

    kwargs: dict[str, Any] = {}
    base = SimConfig()
    for name in _SPLIT_FIELDS:
        default = getattr(base, name)
        pair = (values.pop(f"{name}_1", default[0]), values.pop(f"{name}_2", default[1]))
        if pair != default:
            kwargs[name] = pair
    kwargs.update(values)
    return SimConfig(**kwargs)


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(None, f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text)


def dump_config(cfg: SimConfig) -> str:
    lines = []
    for f in fields(SimConfig):
        value = getattr(cfg, f.name)
        if f.name in _SPLIT_FIELDS:
            for m in range(2):
                v = value[m]
                if f.name == "activity":
                    text = ", ".join(repr(float(x)) for row in v for x in row)
                else:
                    text = repr(v)
                lines.append(f"{f.name}_{m + 1} = {text}")
        else:
            lines.append(f"{f.name} = {value!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# random substreams


class Stream(enum.Enum):
    TRAFFIC = "traffic"
    SLOT_TYPE = "slot-type"
    REJECTION = "rejection"
    EXPLORATION = "exploration"
    REPLAY = "replay"
    WEIGHT_INIT = "weight-init"


# Stable integer codes; never reorder, the draw sequences depend on them.
_STREAM_CODES = {
    Stream.TRAFFIC: 1,
    Stream.SLOT_TYPE: 2,
    Stream.REJECTION: 3,
    Stream.EXPLORATION: 4,
    Stream.REPLAY: 5,
    Stream.WEIGHT_INIT: 6,
}


def substream(master_seed: int, label: Stream | str) -> np.random.Generator:
    """Independent generator for one consumer of randomness.

    PCG64 seeded through ``SeedSequence((seed, code))`` is platform
    independent, so equal inputs give equal draws everywhere.
    """
    label = Stream(label)
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    seq = np.random.SeedSequence([int(master_seed), _STREAM_CODES[label]])
    return np.random.Generator(np.random.PCG64(seq))
