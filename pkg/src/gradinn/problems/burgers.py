"""Viscous Burgers equation ``u_t + u u_x = nu u_xx`` on [-8, 8] x [0, 10].

Initial condition ``u(0, x) = -sin(pi x / 8)``, homogeneous Dirichlet
boundaries.  Diffusion is treated with Crank-Nicolson, convection of the
flux ``u^2 / 2`` explicitly with second-order Adams-Bashforth; both use
fourth-order central differences (second order next to the walls).  The
internal grid is a refinement of the output grid, so output values are read
off without interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from ..seeding import SeedLike, rng

X_RANGE = (-8.0, 8.0)
T_RANGE = (0.0, 10.0)
NU = 0.1
NU_STEEP = 0.01 / math.pi


class SolverInstability(FloatingPointError):
    pass


def initial_condition(x):
    return -np.sin(np.pi * np.asarray(x) / 8.0)


@dataclass
class BurgersSolution:
    t: np.ndarray      # (nt,)
    x: np.ndarray      # (nx,)
    u: np.ndarray      # (nt, nx)
    u_t: np.ndarray    # (nt, nx)
    u_x: np.ndarray    # (nt, nx)
    nu: float

    def points(self) -> np.ndarray:
        """All grid nodes as ``(t, x)`` rows, t-major."""
        T, X = np.meshgrid(self.t, self.x, indexing="ij")
        return np.stack([T.ravel(), X.ravel()], axis=1)

    def values(self) -> np.ndarray:
        return self.u.ravel()

    def gradients(self) -> np.ndarray:
        """``(n, 1, 2)`` array of ``(u_t, u_x)`` per node, matching :meth:`points`."""
        return np.stack([self.u_t.ravel(), self.u_x.ravel()], axis=1)[:, None, :]


def _d1(f, dx):
    """First derivative on interior nodes, ``f`` including both walls."""
    out = np.empty(len(f) - 2)
    out[1:-1] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * dx)
    out[0] = (f[2] - f[0]) / (2 * dx)
    out[-1] = (f[-1] - f[-3]) / (2 * dx)
    return out


def _d2(f, dx):
    out = np.empty(len(f) - 2)
    out[1:-1] = (-f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]) / (12 * dx * dx)
    out[0] = (f[2] - 2 * f[1] + f[0]) / (dx * dx)
    out[-1] = (f[-1] - 2 * f[-2] + f[-3]) / (dx * dx)
    return out


def _diffusion_bands(n: int, dx: float, c: float) -> np.ndarray:
    """Banded form of ``I - c * D2`` on ``n`` interior nodes (walls are zero)."""
    k = c / (12 * dx * dx)
    ab = np.zeros((5, n))
    ab[2] = 1 + 30 * k
    ab[1, 1:] = -16 * k
    ab[3, :-1] = -16 * k
    ab[0, 2:] = k
    ab[4, :-2] = k
    # second-order rows next to the walls
    k2 = c / (dx * dx)
    ab[2, 0] = ab[2, -1] = 1 + 2 * k2
    ab[1, 1] = -k2          # row 0, col 1
    ab[0, 2] = 0.0          # row 0, col 2
    ab[3, -2] = -k2         # row n-1, col n-2
    ab[4, -3] = 0.0         # row n-1, col n-3
    ab[3, 0] = -16 * k if n > 2 else -k2  # row 1, col 0
    ab[1, -1] = -16 * k if n > 2 else -k2  # row n-2, col n-1
    return ab


def burgers_solve(
    nu: float = NU,
    nx: int = 256,
    nt: int = 201,
    x_range=X_RANGE,
    t_range=T_RANGE,
    refine: int = None,
    cfl: float = 0.2,
) -> BurgersSolution:
    """Solve on a grid ``refine`` times finer than the ``nt x nx`` output grid.

    ``refine`` defaults to at least 4 and is raised until the internal cell
    Reynolds number ``dx / nu`` is at most 1, which keeps central convection
    free of wiggles for steep fronts.
    """
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    if nx < 3 or nt < 3:
        raise ValueError("need nx, nt >= 3")
    dx_out = (x_range[1] - x_range[0]) / (nx - 1)
    if refine is None:
        refine = max(4, math.ceil(dx_out / nu))
    nf = (nx - 1) * refine + 1
    x = np.linspace(*x_range, nf)
    dx = x[1] - x[0]
    dt_out = (t_range[1] - t_range[0]) / (nt - 1)
    sub = max(refine, math.ceil(dt_out / (cfl * dx)))
    dt = dt_out / sub

    u = initial_condition(x)
    u[0] = u[-1] = 0.0
    n = nf - 2
    lhs = _diffusion_bands(n, dx, 0.5 * nu * dt)

    def convection(v):
        return -_d1(0.5 * v * v, dx)

    U = np.empty((nt, nx))
    UT = np.empty((nt, nx))
    UX = np.empty((nt, nx))

    def record(k, v):
        ux = np.zeros(nf)
        uxx = np.zeros(nf)
        ux[1:-1] = _d1(v, dx)
        uxx[1:-1] = _d2(v, dx)
        ux[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dx)
        ux[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * dx)
        U[k] = v[::refine]
        UX[k] = ux[::refine]
        UT[k] = (nu * uxx - v * ux)[::refine]

    record(0, u)
    prev = None
    for k in range(1, nt):
        for _ in range(sub):
            c_now = convection(u)
            # AB2 with a forward-Euler start
            c = c_now if prev is None else 1.5 * c_now - 0.5 * prev
            rhs = u[1:-1] + 0.5 * nu * dt * _d2(u, dx) + dt * c
            u = np.concatenate([[0.0], solve_banded((2, 2), lhs, rhs), [0.0]])
            prev = c_now
        if not np.all(np.isfinite(u)):
            raise SolverInstability(
                f"non-finite solution by t={t_range[0] + k * dt_out:g}; use a larger refine or smaller cfl"
            )
        record(k, u)
    t = np.linspace(*t_range, nt)
    return BurgersSolution(t, x[::refine], U, UT, UX, nu)


@dataclass
class BurgersData:
    X: np.ndarray
    Y: np.ndarray
    Xc: np.ndarray
    X_test: np.ndarray
    Y_test: np.ndarray
    G_test: np.ndarray
    solution: BurgersSolution
    train_index: np.ndarray


def burgers_datasets(
    solution: BurgersSolution,
    n_train: int = 1000,
    m: int = 22000,
    t_max_train: float = 6.7,
    seed: SeedLike = 0,
) -> BurgersData:
    """Random training nodes with ``t <= t_max_train``; every other node is test data.

    Collocation points are uniform over the full ``(t, x)`` rectangle.
    """
    P = solution.points()
    V = solution.values()
    G = solution.gradients()
    eligible = np.flatnonzero(P[:, 0] <= t_max_train + 1e-12)
    g = rng(seed, 20)
    idx = np.sort(g.choice(eligible, size=n_train, replace=False))
    test = np.setdiff1d(np.arange(len(P)), idx)
    t0, t1 = solution.t[0], solution.t[-1]
    x0, x1 = solution.x[0], solution.x[-1]
    Xc = np.column_stack([g.uniform(t0, t1, m), g.uniform(x0, x1, m)]) if m else np.empty((0, 2))
    return BurgersData(P[idx], V[idx, None], Xc, P[test], V[test, None], G[test], solution, idx)
