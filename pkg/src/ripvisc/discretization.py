"""Uniform finite differences on (0, L) and a uniform time grid on (0, T).

Spatial functions are plain 1-D arrays of interior nodal values (homogeneous
Dirichlet boundary implied); trajectories are 2-D arrays of shape
``(n_steps + 1, n_interior)`` with row ``k`` holding the field at ``t_k``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded


@dataclass(frozen=True)
class SpatialGrid:
    n_interior: int
    L: float = 1.0
    h: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_interior < 2:
            raise ValueError("need at least two interior nodes")
        if not self.L > 0:
            raise ValueError("domain length must be positive")
        h = self.L / (self.n_interior + 1)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "x", h * np.arange(1, self.n_interior + 1))

    @property
    def meas(self):
        return self.L

    def check(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n_interior:
            raise ValueError(
                f"field has {u.shape[-1]} nodes, grid has {self.n_interior}")
        return u

    def laplacian_bands(self, scale=1.0, shift=None):
        """Banded form (for ``solve_banded``) of ``scale*L + diag(shift)``."""
        n = self.n_interior
        c = scale / self.h**2
        ab = np.empty((3, n))
        ab[0, :] = c
        ab[2, :] = c
        ab[1, :] = -2.0 * c
        if shift is not None:
            ab[1, :] += shift
        return ab

    def inner(self, u, v):
        """Discrete L2 inner product (also the H^-1/H^1_0 duality pairing)."""
        return self.h * np.sum(self.check(u) * self.check(v), axis=-1)


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int
    T: float = 1.0
    tau: float = field(init=False)
    t: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError("need at least two time steps")
        if not self.T > 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "tau", self.T / self.n_steps)
        object.__setattr__(self, "t", np.linspace(0.0, self.T, self.n_steps + 1))

    def zeros(self, grid):
        return np.zeros((self.n_steps + 1, grid.n_interior))

    def check(self, traj, grid):
        traj = np.asarray(traj, dtype=float)
        if traj.shape != (self.n_steps + 1, grid.n_interior):
            raise ValueError(
                f"trajectory shape {traj.shape} does not match "
                f"({self.n_steps + 1}, {grid.n_interior})")
        return traj


def laplacian_apply(grid, u):
    """Second difference of ``u`` with zero boundary values (works row-wise)."""
    u = grid.check(u)
    out = -2.0 * u
    out[..., 1:] += u[..., :-1]
    out[..., :-1] += u[..., 1:]
    return out / grid.h**2


def laplacian_solve(grid, f):
    """Solve ``laplacian_apply(grid, u) = f`` by a tridiagonal direct solve."""
    f = grid.check(f)
    rhs = f.T if f.ndim == 2 else f
    u = solve_banded((1, 1), grid.laplacian_bands(), rhs)
    return u.T if f.ndim == 2 else u


def norm_l2(grid, u):
    return np.sqrt(grid.inner(u, u))


def norm_h10(grid, u):
    u = grid.check(u)
    return np.sqrt(np.maximum(-grid.inner(laplacian_apply(grid, u), u), 0.0))


def norm_hm1(grid, u):
    return norm_h10(grid, laplacian_solve(grid, u))


def time_difference(tg, traj):
    """Backward differences ``(x_k - x_{k-1}) / tau`` for k = 1..N."""
    return np.diff(traj, axis=0) / tg.tau


@dataclass
class BochnerNorms:
    l2_h10: float
    linf_h10: float
    h1_l2: float
    w11_hm1: float


def bochner_norms(tg, grid, traj):
    """Time-discrete norms: left rectangle rule in time, backward differences."""
    traj = tg.check(traj, grid)
    tau = tg.tau
    h10 = norm_h10(grid, traj)
    dt = time_difference(tg, traj)
    return BochnerNorms(
        l2_h10=float(np.sqrt(tau * np.sum(h10[:-1] ** 2))),
        linf_h10=float(np.max(h10)),
        h1_l2=float(np.sqrt(h1_inner(tg, grid, traj, traj))),
        w11_hm1=float(tau * np.sum(norm_hm1(grid, traj)[:-1])
                      + tau * np.sum(norm_hm1(grid, dt))),
    )


def h1_inner(tg, grid, a, b):
    """Discrete H^1(I; L^2) inner product matching ``bochner_norms.h1_l2``."""
    tau = tg.tau
    mass = tau * np.sum(grid.inner(a[:-1], b[:-1]))
    stiff = tau * np.sum(grid.inner(time_difference(tg, a), time_difference(tg, b)))
    return float(mass + stiff)


def h1_norm(tg, grid, a):
    return float(np.sqrt(max(h1_inner(tg, grid, a, a), 0.0)))
