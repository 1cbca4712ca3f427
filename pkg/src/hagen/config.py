"""Typed run configuration with strict JSON loading.

Unknown keys are rejected rather than ignored so that a typo in a config file
fails loudly instead of silently training with defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .exceptions import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 40
    hidden_dim: int = 64
    rnn_layers: int = 2
    diffusion_steps: int = 2
    top_k: int = 50
    alpha: float = 3.0
    decoder_layers: int = 2

    def validate(self):
        for name in ("embed_dim", "hidden_dim", "rnn_layers", "diffusion_steps",
                     "top_k", "decoder_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be >= 1, got {getattr(self, name)}")
        if self.alpha <= 0:
            raise ConfigError(f"model.alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class AblationFlags:
    no_homophily: bool = False
    no_dependency: bool = False
    no_graph_learning: bool = False


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    window: int = 7
    learning_rate: float = 0.01
    lr_decay: float = 0.1
    lr_milestones: tuple = (20, 30, 40)
    homophily_weight: float = 0.01
    clip_norm: float = 5.0
    train_frac: float = 0.8125
    val_frac: float = 0.0625
    seed: int = 0
    ablation: AblationFlags = field(default_factory=AblationFlags)

    def validate(self):
        if self.epochs < 0:
            raise ConfigError(f"train.epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got {self.batch_size}")
        if self.window < 1:
            raise ConfigError(f"train.window must be >= 1, got {self.window}")
        if self.learning_rate <= 0:
            raise ConfigError(f"train.learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigError(f"train.lr_decay must be in (0, 1], got {self.lr_decay}")
        if list(self.lr_milestones) != sorted(self.lr_milestones):
            raise ConfigError(f"train.lr_milestones must be sorted, got {self.lr_milestones}")
        if self.homophily_weight < 0:
            raise ConfigError(
                f"train.homophily_weight must be nonnegative, got {self.homophily_weight}"
            )
        if self.clip_norm is not None and self.clip_norm < 0:
            raise ConfigError(f"train.clip_norm must be nonnegative, got {self.clip_norm}")
        if not (0.0 < self.train_frac < 1.0 and 0.0 <= self.val_frac < 1.0):
            raise ConfigError(
                f"split fractions out of range: train={self.train_frac}, val={self.val_frac}"
            )
        if self.train_frac + self.val_frac >= 1.0:
            raise ConfigError(
                "train_frac + val_frac must leave room for a test split, got "
                f"{self.train_frac} + {self.val_frac}"
            )


@dataclass(frozen=True)
class EvalConfig:
    threshold: float = 0.5

    def validate(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"eval.threshold must be in (0, 1), got {self.threshold}")


@dataclass(frozen=True)
class DataConfig:
    events: str = None
    meta: str = None
    graph: str = None
    embeddings: tuple = ()


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def validate(self):
        self.model.validate()
        self.train.validate()
        self.eval.validate()
        if self.train.ablation.no_graph_learning and not self.data.graph:
            raise ConfigError(
                "disabling graph learning requires a graph file to hold the structure fixed"
            )
        return self


def _build(cls, raw, path, converters=None):
    if not isinstance(raw, dict):
        raise ConfigError(f"config section '{path}' must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(fields)
    if unknown:
        raise ConfigError(
            f"unknown config key(s) in '{path}': {', '.join(sorted(unknown))}"
        )
    kwargs = {}
    for key, value in raw.items():
        conv = (converters or {}).get(key)
        kwargs[key] = conv(value) if conv else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config section '{path}': {exc}") from None


def config_from_dict(raw):
    """Build a validated RunConfig from a nested plain dict."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    unknown = set(raw) - {"model", "train", "eval", "data"}
    if unknown:
        raise ConfigError(f"unknown top-level config key(s): {', '.join(sorted(unknown))}")
    model = _build(ModelConfig, raw.get("model", {}), "model")
    train = _build(
        TrainConfig, raw.get("train", {}), "train",
        converters={
            "lr_milestones": lambda v: tuple(int(m) for m in v),
            "ablation": lambda v: _build(AblationFlags, v, "train.ablation"),
        },
    )
    eval_cfg = _build(EvalConfig, raw.get("eval", {}), "eval")
    data = _build(
        DataConfig, raw.get("data", {}), "data",
        converters={"embeddings": lambda v: tuple(v)},
    )
    return RunConfig(model=model, train=train, eval=eval_cfg, data=data).validate()


def load_config(path):
    """Load and validate a JSON run configuration file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(raw)


def config_to_dict(cfg):
    """Plain nested dict for serialization; inverse of config_from_dict."""
    out = dataclasses.asdict(cfg)
    out["train"]["lr_milestones"] = list(cfg.train.lr_milestones)
    out["data"]["embeddings"] = list(cfg.data.embeddings)
    return out
