"""Model checkpoints: one self-describing JSON file per model.

The file carries a format version, the model kind and config, and every
parameter block with its shape; loading rebuilds the model against a
corpus and validates all shapes before overwriting values.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .reader import ReaderConfig, ReaderModel
from .retrieval import RankerConfig, RankerModel

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _params_payload(params) -> dict:
    return {
        p.name: {"shape": list(p.values.shape), "values": p.values.ravel().tolist()}
        for p in params
    }


def save_checkpoint(path: str | Path, kind: str, config, params) -> Path:
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": dataclasses.asdict(config),
        "params": _params_payload(params),
    }
    path = Path(path)
    path.write_text(json.dumps(payload, sort_keys=True))
    return path


def _load_payload(path: str | Path, kind: str) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    payload = json.loads(path.read_text())
    if payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {payload.get('format_version')!r}")
    if payload.get("kind") != kind:
        raise CheckpointError(f"{path}: expected a {kind} checkpoint, found {payload.get('kind')!r}")
    return payload


def _restore_params(model, payload: dict, path) -> None:
    blocks = payload["params"]
    for p in model.parameters():
        if p.name not in blocks:
            raise CheckpointError(f"{path}: missing parameter block {p.name!r}")
        block = blocks[p.name]
        shape = tuple(block["shape"])
        if shape != p.values.shape:
            raise CheckpointError(f"{path}: block {p.name!r} has shape {shape}, model expects {p.values.shape}")
        p.values[...] = np.asarray(block["values"], dtype=np.float64).reshape(shape)


def save_reader(path: str | Path, model: ReaderModel) -> Path:
    return save_checkpoint(path, "reader", model.config, model.parameters())


def load_reader(path: str | Path, corpus: Corpus) -> ReaderModel:
    payload = _load_payload(path, "reader")
    config = ReaderConfig(**payload["config"])
    model = ReaderModel(config, corpus)
    _restore_params(model, payload, path)
    return model


def save_ranker(path: str | Path, model: RankerModel) -> Path:
    return save_checkpoint(path, "ranker", model.config, model.parameters())


def load_ranker(path: str | Path, corpus: Corpus) -> RankerModel:
    payload = _load_payload(path, "ranker")
    config = RankerConfig(**payload["config"])
    model = RankerModel(config, corpus)
    _restore_params(model, payload, path)
    return model
