"""Predator-prey dynamics integrated with classic fixed-step RK4."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PARAMS = (1.3, 0.9, 0.8, 1.4)  # alpha, beta, gamma, delta
X0 = (0.44249296, 4.6280594)
T_SPAN = (0.0, 3.0)


def lv_rhs(state, params=PARAMS) -> np.ndarray:
    """Time derivative ``(x_t, y_t)``; ``state`` may be (2,) or (n, 2)."""
    a, b, g, d = params
    s = np.asarray(state, dtype=np.float64)
    x, y = s[..., 0], s[..., 1]
    return np.stack([a * x - b * x * y, d * x * y - g * y], axis=-1)


def uptake(state, params=PARAMS) -> np.ndarray:
    """Interaction terms ``(-beta x y, delta x y)``."""
    _, b, _, d = params
    s = np.asarray(state, dtype=np.float64)
    xy = s[..., 0] * s[..., 1]
    return np.stack([-b * xy, d * xy], axis=-1)


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray     # (n, 2)
    gradients: np.ndarray  # (n, 2) d/dt of each population
    uptake: np.ndarray     # (n, 2)


def _rk4(state, params, h):
    k1 = lv_rhs(state, params)
    k2 = lv_rhs(state + 0.5 * h * k1, params)
    k3 = lv_rhs(state + 0.5 * h * k2, params)
    k4 = lv_rhs(state + h * k3, params)
    return state + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def lv_solve(t_grid, params=PARAMS, x0=X0, max_step: float = 1e-3) -> Trajectory:
    """Integrate from ``t_grid[0]`` and sample at every grid time.

    Each interval between grid times is split into equal RK4 steps no
    longer than ``max_step``.
    """
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or len(t) == 0 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    states = np.empty((len(t), 2))
    s = np.asarray(x0, dtype=np.float64)
    states[0] = s
    for k in range(1, len(t)):
        span = t[k] - t[k - 1]
        n = max(1, math.ceil(span / max_step - 1e-9))
        h = span / n
        for _ in range(n):
            s = _rk4(s, params, h)
        states[k] = s
    return Trajectory(t, states, lv_rhs(states, params), uptake(states, params))


@dataclass
class LVData:
    X: np.ndarray
    Y: np.ndarray
    dY: np.ndarray
    Xc: np.ndarray
    X_test: np.ndarray
    Y_test: np.ndarray
    G_test: np.ndarray
    test_trajectory: Trajectory


def lv_datasets(n_train: int = 5, m: int = 1000, n_test: int = 301, params=PARAMS) -> LVData:
    """Equally spaced training/collocation/test times on [0, 3]; no randomness."""
    t_train = np.linspace(*T_SPAN, n_train)
    t_test = np.linspace(*T_SPAN, n_test)
    tr = lv_solve(t_train, params)
    te = lv_solve(t_test, params)
    return LVData(
        X=t_train[:, None],
        Y=tr.states,
        dY=tr.gradients[:, :, None],
        Xc=np.linspace(*T_SPAN, m)[:, None] if m else np.empty((0, 1)),
        X_test=t_test[:, None],
        Y_test=te.states,
        G_test=te.gradients[:, :, None],
        test_trajectory=te,
    )
