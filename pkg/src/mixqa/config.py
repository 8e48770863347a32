"""Run configuration: one flat key=value namespace for the whole pipeline.

Defaults reproduce the reference training setup: embedding width 100,
GRU width 128, up to 10 context articles, 600 anonymized entity columns,
Adam at 1e-3 with batch 32, frequency threshold 10 for the small entity
vocabulary, and a 1:10 positive:negative ratio for ranker training.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .reader import ReaderConfig
from .retrieval import RankerConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    d_w: int = 100
    d_e: int = 100
    hidden: int = 128
    n_e: int = 600
    M: int = 10
    variant: str = "asv"
    vocab_choice: str = "auto"
    min_count: int = 10
    exponent: int = 4
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    neg_ratio: int = 10
    max_epochs: int = 20
    patience: int = 3
    evals_per_epoch: int = 2
    ranker_steps: int = 2000
    ranker_eval_every: int = 250
    ranker_patience: int = 3
    seed: int = 1
    shuffle_articles: bool = True
    anonymize: bool = True
    deterministic: bool = True
    loss_floor: float = 1e-12

    def reader_config(self) -> ReaderConfig:
        return ReaderConfig(
            d_w=self.d_w,
            d_e=self.d_e,
            hidden=self.hidden,
            n_e=self.n_e,
            M=self.M,
            variant=self.variant,
            vocab_choice=self.vocab_choice,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            evals_per_epoch=self.evals_per_epoch,
            seed=self.seed,
            shuffle_articles=self.shuffle_articles,
            anonymize=self.anonymize,
            loss_floor=self.loss_floor,
        )

    def ranker_config(self) -> RankerConfig:
        return RankerConfig(
            d_w=self.d_w,
            hidden=self.hidden,
            exponent=self.exponent,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            neg_ratio=self.neg_ratio,
            max_steps=self.ranker_steps,
            eval_every=self.ranker_eval_every,
            patience=self.ranker_patience,
            seed=self.seed,
        )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(key: str, raw: str):
    kind = _FIELDS[key].type
    raw = raw.strip()
    if kind == "bool":
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"key {key!r}: expected a boolean, got {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: {exc}") from exc
    return raw


def apply_settings(config: RunConfig, settings: dict[str, str]) -> RunConfig:
    for key, raw in settings.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}; valid keys: {', '.join(sorted(_FIELDS))}")
        setattr(config, key, _coerce(key, raw))
    return config


def parse_config_file(path: str | Path) -> dict[str, str]:
    """key = value lines; blank lines and # comments are ignored."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    settings: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        settings[key.strip()] = value.strip()
    return settings


def load_run_config(config_file: str | None, overrides: dict[str, str]) -> RunConfig:
    """File settings first, then flag overrides on top."""
    config = RunConfig()
    if config_file:
        apply_settings(config, parse_config_file(config_file))
    apply_settings(config, overrides)
    return config
