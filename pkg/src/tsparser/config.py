"""Run configuration: one flat record of model, decoding and optimiser
settings, read from ``key = value`` files and overridable from the command line."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .learn.supervised import TrainConfig
from .learn.weak import WeakConfig
from .neural.model import ModelConfig
from .transitions import Limits

ENV_VAR = "TSPARSER_CONFIG"


class ConfigError(ValueError):
    def __init__(self, msg, path=None, line=None):
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(where + msg)
        self.path, self.line = path, line


@dataclass
class RunConfig:
    mode: str = "td"
    attention: str = "soft"
    word_dim: int = 50
    token_dim: int = 50
    hidden: int = 150
    attention_dim: int = 150
    feature_dim: int = 150
    dropout: float = 0.5
    init_scale: float = 0.08
    train_beam: int = 500
    test_beam: int = 300
    max_open_nt: int = 10
    max_total_nt: int = 10
    max_consecutive_ter: int = 5
    epochs: int = 200
    lr: float = 0.01
    momentum: float = 0.9
    clip_norm: float = 5.0
    lr_patience: int = 3
    ranker_lr: float = 0.01
    distant_ratio: float = 1.0
    seed: int = 0

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.mode, self.attention, self.word_dim, self.token_dim, self.hidden,
                           self.attention_dim, self.feature_dim, self.dropout, self.init_scale)

    def limits(self) -> Limits:
        return Limits(self.max_open_nt, self.max_total_nt, self.max_consecutive_ter)

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, lr=self.lr, momentum=self.momentum,
                           clip_norm=self.clip_norm, lr_patience=self.lr_patience, seed=self.seed)

    def weak_config(self) -> WeakConfig:
        return WeakConfig(epochs=self.epochs, train_beam=self.train_beam, test_beam=self.test_beam,
                          lr=self.lr, momentum=self.momentum, clip_norm=self.clip_norm,
                          ranker_lr=self.ranker_lr, distant_ratio=self.distant_ratio, seed=self.seed)

    def as_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    def update(self, values: dict, path=None, lines=None) -> "RunConfig":
        """Copy with ``values`` (strings or typed) applied; unknown keys and
        unparsable values raise ConfigError."""
        types = {f.name: f.type for f in fields(self)}
        new = asdict(self)
        for key, raw in values.items():
            line = None if lines is None else lines.get(key)
            if key not in types:
                raise ConfigError(f"unknown setting {key!r}", path, line)
            try:
                new[key] = _coerce(raw, types[key])
            except ValueError:
                raise ConfigError(f"bad value {raw!r} for {key}", path, line) from None
        out = RunConfig(**new)
        try:
            out.model_config()
        except ValueError as err:
            raise ConfigError(str(err), path) from None
        return out


def _coerce(raw, kind: str):
    if not isinstance(raw, str):
        raw = str(raw)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw.strip()


def parse_config(text: str, path=None) -> RunConfig:
    """Blank lines and ``#`` comments are ignored; later keys win."""
    values, lines = {}, {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", path, no)
        key, value = (s.strip() for s in line.split("=", 1))
        values[key], lines[key] = value, no
    return RunConfig().update(values, path, lines)


def load_config(path=None) -> RunConfig:
    """From ``path``, else the file named by $TSPARSER_CONFIG, else defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read: {err.strerror}", path, 0) from None
    return parse_config(text, path)
