"""Run configuration: one flat record of every tunable, a key=value config
file loader, and flag overrides (flags win over file, file over defaults)."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass
class RunConfig:
    # embedding
    embed_dim: int = 300
    window: int = 5
    negatives: int = 100
    batch: int = 1024
    epochs: int = 10
    lr: float = 0.001
    embed_lr: float = 0.025
    subsample_threshold: float = 0.001  # sequence-level duplicate subsampling
    # recommender
    alpha: float = 0.5
    path_budget: int = 5
    max_len: int = 10
    max_call_depth: int = 10
    hidden: int = 256
    layers: int = 2
    loss_mode: str = "hybrid"
    optimizer: str = "adam"
    clip_norm: float = 5.0
    # corpus
    api_min_freq: int = 5
    const_min_freq: int = 100
    train_frac: float = 0.8
    # reproducibility
    seed: int = 0
    threads: int = 1

    def validate(self) -> None:
        if self.embed_dim < 1 or self.window < 1 or self.negatives < 1:
            raise ConfigError("embed_dim, window, negatives must be >= 1")
        if self.batch < 1 or self.epochs < 0 or self.lr <= 0:
            raise ConfigError("batch must be >= 1, epochs >= 0, lr > 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must be in [0, 1]")
        if self.path_budget < 1 or self.max_len < 1 or self.max_call_depth < 0:
            raise ConfigError("path_budget, max_len >= 1 and max_call_depth >= 0")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigError("train_frac must be in (0, 1)")
        if self.loss_mode not in ("hybrid", "token_level", "sequence_level"):
            raise ConfigError(f"unknown loss_mode {self.loss_mode!r}")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def load_config_file(path) -> dict:
    """Parse `key=value` lines; `#` comments and blank lines ignored."""
    values: dict = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, val)
    return values


def _coerce(key: str, val: str):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype in (int, "int"):
            return int(val)
        if ftype in (float, "float"):
            return float(val)
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {val!r}") from e
    return val


def make_config(file_path=None, overrides: dict | None = None) -> RunConfig:
    values = {}
    if file_path:
        values.update(load_config_file(file_path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg
