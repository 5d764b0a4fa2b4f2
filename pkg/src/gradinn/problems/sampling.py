"""Space-filling samplers."""
from __future__ import annotations

import numpy as np

from ..seeding import SeedLike, rng


def latin_hypercube(n: int, d: int, seed: SeedLike) -> np.ndarray:
    """``n`` points in ``[0, 1)^d``, one per stratum in every dimension.

    Each column is an independent random permutation of the strata
    ``0..n-1`` plus a uniform jitter inside the stratum.
    """
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    g = rng(seed)
    strata = np.stack([g.permutation(n) for _ in range(d)], axis=1)
    return (strata + g.random((n, d))) / n


def uniform(n: int, d: int, seed: SeedLike, low=0.0, high=1.0) -> np.ndarray:
    return rng(seed).uniform(low, high, size=(n, d))
