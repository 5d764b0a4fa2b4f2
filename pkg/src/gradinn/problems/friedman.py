"""Five-dimensional Friedman benchmark."""
from __future__ import annotations

import warnings

import numpy as np

from ..seeding import SeedLike, rng
from .sampling import latin_hypercube, uniform

DIM = 5


def _check(X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[-1] != DIM:
        raise ValueError(f"Friedman inputs have {DIM} columns, got {X.shape[-1]}")
    if np.any((X < 0) | (X > 1)):
        warnings.warn("Friedman evaluated outside the unit hypercube", stacklevel=3)
    return X


def friedman_eval(X) -> np.ndarray:
    """Noiseless Friedman #1 function; accepts one point or a batch."""
    single = np.ndim(X) == 1
    X = _check(X)
    x1, x2, x3, x4, x5 = X.T
    u = 10 * np.sin(np.pi * x1 * x2) + 20 * (x3 - 0.5) ** 2 + 10 * x4 + 5 * x5
    return u[0] if single else u


def friedman_grad(X) -> np.ndarray:
    single = np.ndim(X) == 1
    X = _check(X)
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    c = 10 * np.pi * np.cos(np.pi * x1 * x2)
    G = np.stack(
        [c * x2, c * x1, 40 * (x3 - 0.5), np.full_like(x1, 10.0), np.full_like(x1, 5.0)], axis=1
    )
    return G[0] if single else G


def add_noise(Y, c: float, seed: SeedLike) -> np.ndarray:
    """Add ``N(0, (c * std(Y))^2)`` noise to outputs; ``c = 0`` is a no-op."""
    if c < 0:
        raise ValueError("noise level c must be >= 0")
    Y = np.asarray(Y, dtype=np.float64)
    if c == 0:
        return Y.copy()
    sigma = c * Y.std(axis=0)
    return Y + rng(seed).normal(size=Y.shape) * sigma


def training_inputs(n: int, seed: SeedLike) -> np.ndarray:
    return latin_hypercube(n, DIM, seed)


def test_inputs(n: int, seed: SeedLike) -> np.ndarray:
    return uniform(n, DIM, seed)
