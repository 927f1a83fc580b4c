"""Training configuration and its ``key = value`` text format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path


@dataclass(frozen=True)
class TrainConfig:
    # encoder
    d_h: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 0  # 0 -> 4 * d_h
    dropout: float = 0.1
    mhia_layers: int = 2
    max_len: int = 128
    # label graph
    gcn_layers: int = 2
    d_r: int = 100
    gcn_dropout: float = 0.1
    # objective
    lambda_global: float = 0.1
    lambda_local: float = 1.0
    tau: float = 0.1
    per_level_global: bool = False
    exclude_self: bool = False
    # optimization
    lr: float = 1e-5
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 0.0  # 0 disables
    lr_schedule: str = "constant"  # or "linear" decay to zero
    batch_size: int = 32
    epochs: int = 15
    eval_interval: int = 100
    log_interval: int = 10
    seed: int = 0
    # ablations
    mhia_off: bool = False
    staircase_off: bool = False
    lg_off: bool = False
    ll_off: bool = False
    ll_hard: bool = False

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.eval_interval < 1 or self.log_interval < 1:
            raise ValueError("eval_interval and log_interval must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.lambda_global < 0 or self.lambda_local < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lr_schedule not in ("constant", "linear"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")

    @classmethod
    def published(cls, **overrides) -> "TrainConfig":
        """Published settings, meant for a pre-trained encoder on real data."""
        return cls(**overrides)

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        """Settings for the from-scratch encoder on synthetic corpora."""
        return cls(**{**DESK_OVERRIDES, **overrides})

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def ff_width(self) -> int:
        return self.d_ff or 4 * self.d_h


DESK_OVERRIDES = {"lr": 1e-3, "epochs": 200}

_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def parse_value(key: str, raw: str):
    if key not in _TYPES:
        raise KeyError(f"unknown config key {key!r}")
    kind = _TYPES[key]
    raw = raw.strip()
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        out[key] = parse_value(key, raw)
    return out


def load_config_file(path: str | Path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def dump_config(config: TrainConfig) -> str:
    lines = []
    for key, value in config.to_dict().items():
        if isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
