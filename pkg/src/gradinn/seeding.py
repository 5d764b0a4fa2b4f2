"""Deterministic, stream-separated random generators."""
from __future__ import annotations

from typing import Tuple, Union

import numpy as np

SeedLike = Union[int, Tuple[int, ...]]


def seed_join(seed: SeedLike, *stream: int) -> Tuple[int, ...]:
    base = tuple(seed) if isinstance(seed, (tuple, list)) else (int(seed),)
    return (*base, *(int(s) for s in stream))


def rng(seed: SeedLike, *stream: int) -> np.random.Generator:
    """Generator for ``seed`` on an independent sub-stream."""
    return np.random.default_rng(np.random.SeedSequence(list(seed_join(seed, *stream))))
