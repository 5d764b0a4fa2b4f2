"""One-dimensional toy target on [-2, 3].

The target is a fixed smooth stand-in: a damped oscillation plus a linear
trend, sampled at 5 equally spaced points in [-1, 2].
"""
from __future__ import annotations

import numpy as np

DOMAIN = (-2.0, 3.0)
TRAIN_INTERVAL = (-1.0, 2.0)
N_TRAIN = 5


def toy1d_eval(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sin(2 * x) * np.exp(-0.1 * x**2) + 0.5 * x


def toy1d_grad(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-0.1 * x**2)
    return 2 * np.cos(2 * x) * e - 0.2 * x * np.sin(2 * x) * e + 0.5


def training_inputs(n: int = N_TRAIN) -> np.ndarray:
    return np.linspace(*TRAIN_INTERVAL, n)


def collocation_inputs(m: int = 100) -> np.ndarray:
    return np.linspace(*DOMAIN, m)


def grid(n: int = 1000) -> np.ndarray:
    return np.linspace(*DOMAIN, n)
