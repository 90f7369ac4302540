"""Objective, discrete adjoint and reduced gradient of the regularized control problem.

The adjoint is the exact transpose of the implicit Euler forward scheme
(discretize-then-optimize), so the reduced gradient agrees with finite
differences of the discrete objective up to Newton tolerance and rounding.

Index conventions (N = n_steps):

* ``q[N] = beta (z_N - z_T)`` and, for k = N..1,
  ``xi[k]`` solves ``-(rho+tau) L xi_k + |w_k|''_rho xi_k = q_k`` and
  ``q[k-1] = q[k] + tau (L xi_k + alpha (z_{k-1} - z_d,{k-1}))``.
* ``xi[0]`` is unused and set to zero.
* The derivative of ``j1 + j2`` in direction ``h`` is ``tau * sum_{k>=1} <xi_k, h_k>``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .discretization import h1_inner, h1_norm, laplacian_apply, norm_hm1
from .state import solve_linearized, solve_regularized, step_matrix


@dataclass
class ObjectiveSpec:
    """Quadratic tracking: ``alpha/2 int |z - z_d|^2 dt + beta/2 |z(T) - z_T|^2``."""

    alpha: float = 0.0
    beta: float = 0.0
    z_d: np.ndarray = None
    z_T: np.ndarray = None

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("tracking weights must be nonnegative")
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValueError("tracking weights must be finite")

    def distributed_target(self, tg, grid):
        if self.z_d is None:
            return tg.zeros(grid)
        return tg.check(self.z_d, grid)

    def terminal_target(self, grid):
        if self.z_T is None:
            return np.zeros(grid.n_interior)
        return grid.check(self.z_T)

    def j1_derivative(self, tg, grid, z):
        return self.alpha * (z - self.distributed_target(tg, grid))

    def j2_derivative(self, grid, zT):
        return self.beta * (zT - self.terminal_target(grid))


@dataclass
class AdjointPair:
    q: np.ndarray
    xi: np.ndarray


def _require_zero_start(g):
    if np.any(g[0] != 0.0):
        raise ValueError("controls must satisfy g(0) = 0")


def state_objective(spec, tg, grid, z):
    """``j1(z) + j2(z(T))`` with the left rectangle rule in time."""
    zd = spec.distributed_target(tg, grid)
    j1 = 0.5 * spec.alpha * tg.tau * np.sum(grid.inner(z[:-1] - zd[:-1], z[:-1] - zd[:-1]))
    dT = z[-1] - spec.terminal_target(grid)
    j2 = 0.5 * spec.beta * grid.inner(dT, dT)
    return float(j1 + j2)


def objective_value(spec, tg, grid, z, g, g_anchor=None, prox_weight=0.0):
    g = tg.check(g, grid)
    _require_zero_start(g)
    val = state_objective(spec, tg, grid, z) + 0.5 * h1_inner(tg, grid, g, g)
    if prox_weight:
        d = g - (0.0 if g_anchor is None else g_anchor)
        val += 0.5 * prox_weight * h1_inner(tg, grid, d, d)
    return float(val)


def solve_adjoint(prob, spec, state):
    grid, tg = prob.grid, prob.tg
    z = state.z
    j1p = spec.j1_derivative(tg, grid, z)
    q = tg.zeros(grid)
    xi = tg.zeros(grid)
    q[-1] = spec.j2_derivative(grid, z[-1])
    for k in range(tg.n_steps, 0, -1):
        xi[k] = solve_banded((1, 1), step_matrix(prob, state.rates[k]), q[k])
        q[k - 1] = q[k] + tg.tau * (laplacian_apply(grid, xi[k]) + j1p[k - 1])
    return AdjointPair(q=q, xi=xi)


def _riesz_bands(tg):
    # -p'' + p = f with p(0) = 0 and natural condition at T; unknowns p_1..p_N
    n, tau = tg.n_steps, tg.tau
    ab = np.empty((3, n))
    ab[0, :] = -1.0 / tau
    ab[2, :] = -1.0 / tau
    ab[1, :] = tau + 2.0 / tau
    ab[1, -1] = 1.0 / tau  # left rectangle rule puts no mass on the last node
    return ab


def riesz_h1star(tg, f):
    """Representative ``p`` (``p[0] = 0``) of ``h -> tau sum_{k>=1} <f_k, h_k>`` in ``h1_inner``."""
    f = np.asarray(f, dtype=float)
    p = np.zeros_like(f)
    p[1:] = solve_banded((1, 1), _riesz_bands(tg), tg.tau * f[1:])
    return p


@dataclass
class Evaluation:
    objective: float
    gradient: np.ndarray
    gradient_norm: float
    state: object
    adjoint: AdjointPair


def evaluate(prob, spec, g, g_anchor=None, prox_weight=0.0, need_gradient=True):
    """Objective of the reduced problem and, optionally, its H^1_* gradient."""
    grid, tg = prob.grid, prob.tg
    g = tg.check(g, grid)
    _require_zero_start(g)
    state = solve_regularized(prob, g)
    J = objective_value(spec, tg, grid, state.z, g, g_anchor, prox_weight)
    ev = Evaluation(J, None, None, state, None)
    if need_gradient:
        add_gradient(prob, spec, g, ev, g_anchor, prox_weight)
    return ev


def add_gradient(prob, spec, g, ev, g_anchor=None, prox_weight=0.0):
    """Fill in adjoint and gradient of an evaluation computed without them."""
    tg = prob.tg
    ev.adjoint = solve_adjoint(prob, spec, ev.state)
    r = riesz_h1star(tg, ev.adjoint.xi) + (1.0 + prox_weight) * g
    if prox_weight and g_anchor is not None:
        r -= prox_weight * g_anchor
    r[0] = 0.0
    ev.gradient = r
    ev.gradient_norm = h1_norm(tg, prob.grid, r)
    return ev


def reduced_gradient(prob, spec, g, g_anchor=None, prox_weight=0.0):
    return evaluate(prob, spec, g, g_anchor, prox_weight).gradient


def state_derivative(prob, spec, state, h):
    """``d(j1 + j2)`` along the linearized state ``S'(g) h`` (forward-mode route)."""
    grid, tg = prob.grid, prob.tg
    zeta = solve_linearized(prob, state, h)
    j1p = spec.j1_derivative(tg, grid, state.z)
    j2p = spec.j2_derivative(grid, state.z[-1])
    return float(tg.tau * np.sum(grid.inner(j1p[:-1], zeta[:-1])) + grid.inner(j2p, zeta[-1]))


def adjoint_pairing(tg, grid, xi, h):
    return float(tg.tau * np.sum(grid.inner(xi[1:], h[1:])))


@dataclass
class GradCheckRow:
    eps: float
    finite_difference: float
    adjoint: float
    abs_error: float
    rel_error: float


def grad_check(prob, spec, g, h, eps_list=(1e-3, 1e-4), g_anchor=None, prox_weight=0.0):
    """Compare ``<grad, h>_{H^1}`` with central differences of the reduced objective."""
    grid, tg = prob.grid, prob.tg
    h = np.array(tg.check(h, grid))
    h[0] = 0.0
    ev = evaluate(prob, spec, g, g_anchor, prox_weight)
    adj = h1_inner(tg, grid, ev.gradient, h)
    rows = []
    for eps in eps_list:
        jp = evaluate(prob, spec, g + eps * h, g_anchor, prox_weight, need_gradient=False).objective
        jm = evaluate(prob, spec, g - eps * h, g_anchor, prox_weight, need_gradient=False).objective
        fd = (jp - jm) / (2.0 * eps)
        err = abs(fd - adj)
        rows.append(GradCheckRow(eps, fd, adj, err, err / max(abs(adj), abs(fd), 1e-300)))
    return rows


def adjoint_bound_terms(prob, spec, state, adj):
    """Both sides of the rho-uniform adjoint estimate (without the constant)."""
    grid, tg = prob.grid, prob.tg
    q_inf = float(np.max(norm_hm1(grid, adj.q)))
    xi_l2 = float(np.sqrt(tg.tau * np.sum(-grid.inner(laplacian_apply(grid, adj.xi[1:]), adj.xi[1:]))))
    j2 = float(norm_hm1(grid, spec.j2_derivative(grid, state.z[-1])))
    j1 = spec.j1_derivative(tg, grid, state.z)
    j1_l2 = float(np.sqrt(tg.tau * np.sum(norm_hm1(grid, j1[:-1]) ** 2)))
    return {"q_linf_hm1": q_inf, "xi_l2_h10": xi_l2, "lhs": q_inf + np.sqrt(prob.rho) * xi_l2,
            "j2_hm1": j2, "j1_l2_hm1": j1_l2, "data": j2 + j1_l2}
