"""Run configuration: one TOML file with a section per component, plus dotted CLI overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .context import ContextConfig
from .encoder import EncoderConfig
from .errors import ConfigError
from .filters import FilterConfig
from .reasoner import ReasonerConfig
from .retrieval import RetrievalConfig


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    optimizer: str = "adamw"
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 30
    batch_size: int = 4
    literal_loss: bool = False
    clip_norm: float | None = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.optimizer != "adamw":
            raise ConfigError(f"unsupported optimizer {self.optimizer!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs >= 0 and batch_size >= 1 required")


SECTIONS = {
    "context": ContextConfig,
    "filter": FilterConfig,
    "encoder": EncoderConfig,
    "reasoner": ReasonerConfig,
    "train": TrainConfig,
    "retrieval": RetrievalConfig,
}


@dataclass(frozen=True)
class RunConfig:
    setting: str = "closed"
    seed: int = 7
    retrieval_corpus: str | None = None
    context: ContextConfig = field(default_factory=ContextConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    reasoner: ReasonerConfig = field(default_factory=ReasonerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)

    def __post_init__(self):
        if self.setting not in ("closed", "open"):
            raise ConfigError(f"setting must be 'closed' or 'open', got {self.setting!r}")
        if self.setting == "open" and not self.retrieval_corpus:
            raise ConfigError("open setting requires retrieval_corpus")
        if self.encoder.max_positions < self.filter.token_budget:
            raise ConfigError("encoder.max_positions must cover filter.token_budget")

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        """Dotted keys ("filter.top_k") address nested sections."""
        return apply_overrides(self, changes)


def _build(cls, values, where):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {unknown}")
    return cls(**values)


def from_dict(d: dict) -> RunConfig:
    d = dict(d)
    kwargs = {}
    for name, cls in SECTIONS.items():
        if name in d:
            kwargs[name] = _build(cls, d.pop(name), name)
    for key in list(d):
        if key not in ("setting", "seed", "retrieval_corpus"):
            raise ConfigError(f"unknown top-level config key {key!r}")
    kwargs.update(d)
    return RunConfig(**kwargs)


def _coerce(raw, current):
    if not isinstance(raw, str):
        return raw
    if isinstance(current, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if current is None:
        if raw.lower() == "none":
            return None
        for conv in (int, float):
            try:
                return conv(raw)
            except ValueError:
                pass
    return raw


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    d = cfg.to_dict()
    for key, raw in overrides.items():
        parts = key.split(".")
        node = d
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown config section in {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = _coerce(raw, node[parts[-1]])
    return from_dict(d)


def load_config(path=None, overrides=None) -> RunConfig:
    d = {}
    if path is not None:
        with open(Path(path), "rb") as fh:
            try:
                d = tomli.load(fh)
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    cfg = from_dict(d)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg
