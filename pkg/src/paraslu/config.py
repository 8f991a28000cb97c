"""Hyperparameters and run configuration."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Hyper:
    """Model hyperparameters shared by the parser, language models and seq2seq."""

    emb_dim: int = 32
    hidden: int = 48
    attn_dim: int = 32
    epochs: int = 20
    batch_size: int = 16
    lr: float = 0.01
    clip: float = 5.0
    bptt: int = 35
    max_len: int = 30
    # per-epoch cap on training examples (0 = use all); keeps pair corpora tractable
    epoch_examples: int = 0
    # probability of replacing an input word by UNK during training
    word_dropout: float = 0.0

    def __post_init__(self):
        for name in ("emb_dim", "hidden", "attn_dim", "epochs", "batch_size", "bptt", "max_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epoch_examples < 0:
            raise ConfigError("epoch_examples must be >= 0")
        if not 0.0 <= self.word_dropout < 1.0:
            raise ConfigError("word_dropout must lie in [0, 1)")
        if not self.lr > 0 or not self.clip > 0:
            raise ConfigError("lr and clip must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyper":
        return _strict(cls, d)


def _strict(cls, d):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class RunConfig:
    # a short, word-dropout-regularised parser run keeps its confidences informative
    parser: Hyper = field(default_factory=lambda: Hyper(epochs=5, word_dropout=0.15))
    lm: Hyper = field(default_factory=lambda: Hyper(epochs=15))
    seq2seq: Hyper = field(default_factory=lambda: Hyper(
        hidden=64, epochs=20, epoch_examples=2000, word_dropout=0.1))
    beam_width: int = 5
    tau: float = 0.8
    max_decode_len: int = 30
    seed: int = 1
    modes: tuple = ("rnn", "seq2seq")
    train: str = ""
    test: str = ""
    dev: str = ""

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        if self.beam_width < 1 or self.max_decode_len < 1:
            raise ConfigError("beam_width and max_decode_len must be >= 1")
        bad = set(self.modes) - {"rnn", "seq2seq", "both"}
        if bad:
            raise ConfigError(f"unknown modes: {sorted(bad)}")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        for key in ("parser", "lm", "seq2seq"):
            if key in d:
                if not isinstance(d[key], dict):
                    raise ConfigError(f"{key} must be an object")
                d[key] = Hyper.from_dict(d[key])
        if "modes" in d:
            d["modes"] = tuple(d["modes"])
        return _strict(cls, d)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modes"] = list(self.modes)
        return d

    def override(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})
