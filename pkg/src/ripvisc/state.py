"""Forward solvers for the rate-independent evolution and its viscous regularization.

All solvers use fully implicit Euler in time.  For the regularized problem one
step reads

    -(rho + tau) L w_k + |w_k|'_rho = L z_{k-1} + g_k,   z_k = z_{k-1} + tau w_k,

so the rate stored at node ``k`` is the backward difference ``(z_k - z_{k-1})/tau``.
The same stored rates define ``|w_k|''_rho`` for the linearized and adjoint
systems, which makes the discrete adjoint the exact transpose of the
linearization.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_banded
from scipy.optimize import lsq_linear

from .discretization import laplacian_apply, laplacian_solve
from .smoothed_abs import SmoothedAbs

COMPAT_TOL = 1e-12


class NewtonDivergence(RuntimeError):
    pass


class CompatibilityViolation(ValueError):
    pass


class PdasCycle(RuntimeError):
    pass


@dataclass
class RegStateProblem:
    grid: object
    tg: object
    sabs: SmoothedAbs
    newton_tol: float = 1e-10
    newton_max_iter: int = 500

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")

    @property
    def rho(self):
        return self.sabs.rho

    def with_rho(self, rho):
        return RegStateProblem(self.grid, self.tg, SmoothedAbs(rho),
                               self.newton_tol, self.newton_max_iter)


@dataclass
class RISolveProblem:
    grid: object
    tg: object
    pdas_c: float = 1.0
    pdas_max_iter: int = 200
    pdas_retries: int = 3
    fallback: bool = True  # dual box QP when every PDAS restart cycles

    def __post_init__(self):
        if not self.pdas_c > 0:
            raise ValueError("pdas_c must be positive")


@dataclass
class RegularizedState:
    z: np.ndarray
    rates: np.ndarray  # rates[k] = (z_k - z_{k-1})/tau; rates[0] = T_rho(g(0))
    rho: float
    newton_iterations: int = 0


@dataclass
class RateIndependentState:
    z: np.ndarray
    lam: np.ndarray  # driving force L z_k + g_k
    pdas_iterations: int = 0
    fallback_steps: int = 0

    def rates(self, tg):
        w = np.zeros_like(self.z)
        w[1:] = np.diff(self.z, axis=0) / tg.tau
        return w


def check_compatibility(g0):
    excess = np.max(np.abs(g0)) - 1.0
    if excess > COMPAT_TOL:
        raise CompatibilityViolation(
            f"initial load violates |g(0)| <= 1 by {excess:.3e}")


def _residual(prob, visc, w, v):
    return -visc * laplacian_apply(prob.grid, w) + prob.sabs.first(w) - v


def t_rho_solve(prob, v, extra_visc=0.0, w0=None, return_iterations=False):
    """Solve ``-(rho + extra_visc) L w + |w|'_rho = v`` by damped Newton.

    The Jacobian is symmetric positive definite and tridiagonal.  Once the
    residual is below ``newton_tol`` one extra undamped step is attempted and
    kept only if it does not increase the residual.
    """
    grid = prob.grid
    v = grid.check(v)
    if extra_visc < 0:
        raise ValueError("extra_visc must be nonnegative")
    visc = prob.rho + extra_visc
    w = np.zeros_like(v) if w0 is None else np.array(w0, dtype=float)
    F = _residual(prob, visc, w, v)
    res = np.max(np.abs(F))
    for it in range(prob.newton_max_iter):
        if res <= prob.newton_tol:
            ab = grid.laplacian_bands(-visc, shift=prob.sabs.second(w))
            wp = w - solve_banded((1, 1), ab, F)
            Fp = _residual(prob, visc, wp, v)
            if np.max(np.abs(Fp)) <= res:
                w = wp
            return (w, it) if return_iterations else w
        ab = grid.laplacian_bands(-visc, shift=prob.sabs.second(w))
        d = solve_banded((1, 1), ab, -F)
        nrm = np.linalg.norm(F)
        t = 1.0
        while True:
            wn = w + t * d
            Fn = _residual(prob, visc, wn, v)
            if np.linalg.norm(Fn) <= (1.0 - 1e-4 * t) * nrm:
                break
            t *= 0.5
            if t < 1e-12:
                raise NewtonDivergence(
                    f"line search failed at residual {res:.3e}")
        w, F = wn, Fn
        res = np.max(np.abs(F))
    raise NewtonDivergence(
        f"no convergence in {prob.newton_max_iter} iterations "
        f"(residual {res:.3e}, tol {prob.newton_tol:.1e})")


def solve_regularized(prob, g):
    grid, tg = prob.grid, prob.tg
    g = tg.check(g, grid)
    check_compatibility(g[0])
    z = tg.zeros(grid)
    rates = tg.zeros(grid)
    w, total = t_rho_solve(prob, g[0], 0.0, return_iterations=True)
    rates[0] = w
    for k in range(tg.n_steps):
        v = laplacian_apply(grid, z[k]) + g[k + 1]
        w, it = t_rho_solve(prob, v, tg.tau, w0=w, return_iterations=True)
        total += it
        rates[k + 1] = w
        z[k + 1] = z[k] + tg.tau * w
    return RegularizedState(z=z, rates=rates, rho=prob.rho,
                            newton_iterations=total)


def step_matrix(prob, rate):
    """Banded ``-(rho + tau) L + diag(|rate|''_rho)`` shared by linearized and adjoint steps."""
    return prob.grid.laplacian_bands(-(prob.rho + prob.tg.tau),
                                     shift=prob.sabs.second(rate))


def solve_linearized(prob, state, h, return_rates=False):
    """Directional derivative of the discrete solution map in direction ``h``."""
    grid, tg = prob.grid, prob.tg
    h = tg.check(h, grid)
    zeta = tg.zeros(grid)
    omega = tg.zeros(grid)
    for k in range(tg.n_steps):
        rhs = laplacian_apply(grid, zeta[k]) + h[k + 1]
        om = solve_banded((1, 1), step_matrix(prob, state.rates[k + 1]), rhs)
        omega[k + 1] = om
        zeta[k + 1] = zeta[k] + tg.tau * om
    return (zeta, omega) if return_rates else zeta


def _solve_on_active(grid, idx, rhs):
    # principal submatrix of the tridiagonal Laplacian, still tridiagonal in compressed order
    m = idx.size
    c = 1.0 / grid.h**2
    link = (np.diff(idx) == 1) * c
    ab = np.zeros((3, m))
    ab[1] = -2.0 * c
    ab[0, 1:] = link
    ab[2, :-1] = link
    return solve_banded((1, 1), ab, rhs)


def pdas_increment(grid, b, c=1.0, max_iter=200, act_tol=1e-12, sets=None):
    """Increment ``v`` with ``lam = b + L v`` satisfying ``v in N_[-1,1](lam)`` nodewise.

    ``sets`` optionally gives the initial ``(upper, lower)`` active masks.
    Returns ``(v, lam, iterations)``; raises ``PdasCycle`` when the active
    sets have not settled after ``max_iter`` sweeps.
    """
    n = b.size
    v = np.zeros(n)
    lam = b.copy()
    if sets is None:
        up = lam > 1.0 + act_tol
        lo = lam < -1.0 - act_tol
    else:
        up, lo = (np.asarray(m, dtype=bool).copy() for m in sets)
    for it in range(1, max_iter + 1):
        v = np.zeros(n)
        act = up | lo
        if act.any():
            idx = np.flatnonzero(act)
            target = np.where(up[idx], 1.0, -1.0)
            v[idx] = _solve_on_active(grid, idx, target - b[idx])
        lam = b + laplacian_apply(grid, v)
        pred = lam + c * v
        up_new = pred > 1.0 + act_tol
        lo_new = pred < -1.0 - act_tol
        if np.array_equal(up_new, up) and np.array_equal(lo_new, lo):
            return v, lam, it
        up, lo = up_new, lo_new
    raise PdasCycle(f"active sets still changing after {max_iter} iterations")


def dual_box_sets(grid, b, tol=1e-9):
    """Active masks from the dual problem ``min 1/2 |lam - b|^2_{(-L)^-1}`` over ``|lam| <= 1``.

    Solved by bounded-variable least squares, an active-set method with finite
    termination, on the Cholesky factor of ``(-L)^-1``.  Dense, so meant as a
    fallback only.
    """
    G = -laplacian_solve(grid, np.eye(b.size))
    U = cholesky(G)
    lam = lsq_linear(U, U @ b, bounds=(-1.0, 1.0), method="bvls", tol=1e-15).x
    return lam > 1.0 - tol, lam < -1.0 + tol


def _increment(prob, b):
    c = prob.pdas_c
    for attempt in range(prob.pdas_retries + 1):
        try:
            return pdas_increment(prob.grid, b, c, prob.pdas_max_iter) + (False,)
        except PdasCycle:
            if attempt == prob.pdas_retries and not prob.fallback:
                raise
            c *= 10.0
    sets = dual_box_sets(prob.grid, b)
    return pdas_increment(prob.grid, b, prob.pdas_c, prob.pdas_max_iter, sets=sets) + (True,)


def solve_rate_independent(prob, g):
    grid, tg = prob.grid, prob.tg
    g = tg.check(g, grid)
    check_compatibility(g[0])
    z = tg.zeros(grid)
    lam = tg.zeros(grid)
    lam[0] = g[0]
    total = fallbacks = 0
    for k in range(tg.n_steps):
        b = laplacian_apply(grid, z[k]) + g[k + 1]
        v, lam[k + 1], it, fell_back = _increment(prob, b)
        total += it
        fallbacks += fell_back
        z[k + 1] = z[k] + v
    return RateIndependentState(z=z, lam=lam, pdas_iterations=total, fallback_steps=fallbacks)


def scalar_play(s, radius=1.0, a0=0.0):
    """Discrete play operator: ``a_k`` is the projection of ``a_{k-1}`` onto ``[s_k - r, s_k + r]``."""
    s = np.asarray(s, dtype=float)
    a = np.empty_like(s)
    a[0] = a0
    for k in range(1, s.size):
        a[k] = min(max(a[k - 1], s[k] - radius), s[k] + radius)
    return a
