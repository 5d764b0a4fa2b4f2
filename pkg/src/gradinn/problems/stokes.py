"""Creeping flow past a sphere, reduced to the speed in the plane x3 = 0."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_U_INF = (5.0, 0.0, 0.0)


class OutsideDomainError(ValueError):
    """Point lies strictly inside the sphere."""


def stokes_velocity(X, R: float = 1.0, u_inf=DEFAULT_U_INF) -> np.ndarray:
    """Closed-form velocity at 3-D points ``X`` (n, 3) with ``|x| >= R``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    u_inf = np.asarray(u_inf, dtype=np.float64)
    r = np.linalg.norm(X, axis=1)
    if np.any(r < R * (1 - 1e-12)):
        raise OutsideDomainError("Stokes solution is only defined outside the sphere")
    # (x (x) x) u = x (x . u)
    a = 3 * R**3 / (4 * r**5) - 3 * R / (4 * r**3)
    b = -(R**3) / (4 * r**3) - 3 * R / (4 * r) + 1.0
    return a[:, None] * X * (X @ u_inf)[:, None] + b[:, None] * u_inf


def stokes_speed(x1, x2, R: float = 1.0, u_inf=DEFAULT_U_INF):
    """Euclidean norm of the velocity at ``(x1, x2, 0)``; scalars or arrays."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    shape = np.broadcast(x1, x2).shape
    P = np.stack([np.broadcast_to(x1, shape).ravel(), np.broadcast_to(x2, shape).ravel(),
                  np.zeros(int(np.prod(shape)))], axis=1)
    s = np.linalg.norm(stokes_velocity(P, R, u_inf), axis=1).reshape(shape)
    return float(s) if s.ndim == 0 else s


def stokes_speed_grad(X, R: float = 1.0, u_inf=DEFAULT_U_INF, h: float = 1e-6) -> np.ndarray:
    """Finite-difference gradient of the speed at planar points ``X`` (n, 2).

    Central differences, falling back to one-sided ones where a stencil point
    would land inside the sphere.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    f0 = stokes_speed(X[:, 0], X[:, 1], R, u_inf)
    G = np.empty_like(X)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        up, dn = X + e, X - e
        ok_up = np.linalg.norm(up, axis=1) >= R
        ok_dn = np.linalg.norm(dn, axis=1) >= R
        up = np.where(ok_up[:, None], up, X)
        dn = np.where(ok_dn[:, None], dn, X)
        fu = stokes_speed(up[:, 0], up[:, 1], R, u_inf)
        fd = stokes_speed(dn[:, 0], dn[:, 1], R, u_inf)
        G[:, i] = (np.where(ok_up, fu, f0) - np.where(ok_dn, fd, f0)) / (h * (ok_up.astype(float) + ok_dn.astype(float)))
    return G


@dataclass
class StokesData:
    X: np.ndarray
    Y: np.ndarray
    Xc: np.ndarray
    X_test: np.ndarray
    Y_test: np.ndarray
    G_test: np.ndarray
    n_grid: int


def _outside_grid(n1: int, R: float, half_width: float, n2: int = None) -> np.ndarray:
    g1 = np.linspace(-half_width, half_width, n1)
    g2 = np.linspace(-half_width, half_width, n1 if n2 is None else n2)
    X = np.stack(np.meshgrid(g1, g2, indexing="ij"), axis=-1).reshape(-1, 2)
    return X[np.linalg.norm(X, axis=1) >= R]


def grid_for_count(target: int, R: float = 1.0, half_width: float = 5.0) -> np.ndarray:
    """Near-square regular grid outside the sphere with size closest to ``target``."""
    best = None
    for n in range(2, int(np.sqrt(target)) + 10):
        for n2 in (n, n + 1):
            X = _outside_grid(n, R, half_width, n2)
            if best is None or abs(len(X) - target) < abs(len(best) - target):
                best = X
    return best


def perimeter(n: int = 50, R: float = 1.0) -> np.ndarray:
    theta = 2 * np.pi * np.arange(n) / n
    return R * np.stack([np.cos(theta), np.sin(theta)], axis=1)


def stokes_datasets(
    n_total: int = 550,
    R: float = 1.0,
    u_inf=DEFAULT_U_INF,
    n_boundary: int = 50,
    m_side: int = 100,
    test_side: int = 200,
    half_width: float = 5.0,
) -> StokesData:
    """Regular-grid training set plus no-slip perimeter points.

    ``n_total`` counts both parts (350/550/750 canonical).  Collocation is an
    ``m_side**2`` grid on the whole square; the test set is a
    ``test_side**2`` grid with interior points removed.  No randomness.
    """
    grid = grid_for_count(n_total - n_boundary, R, half_width)
    rim = perimeter(n_boundary, R)
    X = np.concatenate([grid, rim])
    Y = np.concatenate([stokes_speed(grid[:, 0], grid[:, 1], R, u_inf), np.zeros(n_boundary)])
    g = np.linspace(-half_width, half_width, m_side)
    Xc = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
    Xt = _outside_grid(test_side, R, half_width)
    Yt = stokes_speed(Xt[:, 0], Xt[:, 1], R, u_inf)
    Gt = stokes_speed_grad(Xt, R, u_inf)
    return StokesData(X, Y[:, None], Xc, Xt, Yt[:, None], Gt[:, None, :], len(grid))
