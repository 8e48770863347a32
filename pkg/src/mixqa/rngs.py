"""Named, reproducible random streams.

Every source of randomness in the pipeline draws from its own substream of
the base seed, so changing e.g. negative sampling cannot perturb weight
initialization.
"""

from __future__ import annotations

import numpy as np

_STREAMS = {
    "init": 0,
    "anon": 1,
    "shuffle": 2,
    "order": 3,
    "negatives": 4,
    "synth": 5,
    "r0": 6,
    "eval": 7,
    "split": 8,
}


def substream(seed: int, name: str, extra: int | None = None) -> np.random.Generator:
    if name not in _STREAMS:
        raise ValueError(f"unknown rng stream {name!r}; known: {sorted(_STREAMS)}")
    key = [int(seed), _STREAMS[name]]
    if extra is not None:
        key.append(int(extra))
    return np.random.default_rng(key)
