"""Steepest descent in the discrete H^1_*(I; L^2) metric and continuation in rho.

Steps are proposed by Barzilai-Borwein and safeguarded by Armijo backtracking.
Close to a minimizer the objective decrease drops below rounding noise; there
the sufficient-decrease test falls back to its trapezoidal estimate from the
directional derivatives at both ends of the step.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .adjoint import add_gradient, evaluate
from .discretization import h1_inner, h1_norm
from .io import SolveBundle

ARMIJO_SIGMA = 1e-4
MIN_STEP = 1e-14


class LineSearchStall(RuntimeError):
    pass


@dataclass
class ContinuationSchedule:
    rho_init: float = 1e-1
    factor: float = 0.1
    n_levels: int = 4
    inner_tol: float = 1e-6
    inner_max_iter: int = 500
    delta: float = float("inf")

    def __post_init__(self):
        if not self.rho_init > 0:
            raise ValueError("rho_init must be positive")
        if not 0 < self.factor < 1:
            raise ValueError("factor must lie in (0, 1)")
        if self.n_levels < 1:
            raise ValueError("need at least one level")

    def levels(self):
        return [self.rho_init * self.factor**j for j in range(self.n_levels)]


@dataclass
class LevelRecord:
    rho: float
    iterations: int
    objective: float
    gradient_norm: float
    anchor_distance: float
    converged: bool
    drift: float = None  # ||g_rho - g_previous_rho||_{H^1}
    delta_violated: bool = False
    objective_history: list = field(default_factory=list)


@dataclass
class OptimizeReport:
    levels: list
    g: np.ndarray = None
    z: np.ndarray = None
    rates: np.ndarray = None
    q: np.ndarray = None
    xi: np.ndarray = None
    bundles: list = field(default_factory=list)  # per-level solve bundles when kept

    def summary(self):
        return [{k: v for k, v in asdict(rec).items() if k != "objective_history"}
                for rec in self.levels]

    def drifts(self):
        return [rec.drift for rec in self.levels if rec.drift is not None]


def _line_search(prob, spec, g, ev, step, g_anchor, prox_weight):
    grid, tg = prob.grid, prob.tg
    d = -ev.gradient
    slope = -ev.gradient_norm**2
    noise = 1e-11 * abs(ev.objective)
    while step >= MIN_STEP:
        trial_g = g + step * d
        trial = evaluate(prob, spec, trial_g, g_anchor, prox_weight, need_gradient=False)
        if trial.objective <= ev.objective + ARMIJO_SIGMA * step * slope:
            return trial_g, add_gradient(prob, spec, trial_g, trial, g_anchor, prox_weight), step
        if abs(trial.objective - ev.objective) <= noise:
            add_gradient(prob, spec, trial_g, trial, g_anchor, prox_weight)
            slope_t = h1_inner(tg, grid, trial.gradient, d)
            if 0.5 * (slope + slope_t) <= ARMIJO_SIGMA * slope:
                return trial_g, trial, step
        step *= 0.5
    raise LineSearchStall(
        f"no decrease down to step {MIN_STEP:g} at gradient norm {ev.gradient_norm:.3e}")


def minimize_at_rho(prob, spec, sched, g_start, g_anchor=None, prox_weight=0.0):
    """Minimize the reduced objective at fixed rho; returns ``(g, LevelRecord, Evaluation)``."""
    grid, tg = prob.grid, prob.tg
    g = np.array(tg.check(g_start, grid))
    if np.any(g[0] != 0.0):
        raise ValueError("g_start must satisfy g(0) = 0")
    ev = evaluate(prob, spec, g, g_anchor, prox_weight)
    history = [ev.objective]
    step = 1.0 / (1.0 + prox_weight)
    it = 0
    while ev.gradient_norm > sched.inner_tol and it < sched.inner_max_iter:
        g_new, ev_new, _ = _line_search(prob, spec, g, ev, step, g_anchor, prox_weight)
        s = g_new - g
        y = ev_new.gradient - ev.gradient
        sy = h1_inner(tg, grid, s, y)
        if sy > 0:
            step = h1_inner(tg, grid, s, s) / sy
        else:
            step = 2.0 * step
        step = min(max(step, 1e-10), 1e10)
        g, ev = g_new, ev_new
        history.append(ev.objective)
        it += 1
    anchor = 0.0 if g_anchor is None else g_anchor
    rec = LevelRecord(
        rho=prob.rho, iterations=it, objective=ev.objective,
        gradient_norm=ev.gradient_norm,
        anchor_distance=h1_norm(tg, grid, g - anchor),
        converged=bool(ev.gradient_norm <= sched.inner_tol),
        objective_history=history)
    return g, rec, ev


def continuation_solve(prob, spec, sched, g_anchor=None, prox_weight=0.0, g_start=None,
                       keep_levels=False, log=None):
    """Run ``minimize_at_rho`` along ``rho_j = rho_init * factor**j`` with warm starts.

    ``prob`` supplies grids and Newton settings; its rho is replaced per level.
    """
    grid, tg = prob.grid, prob.tg
    g = tg.zeros(grid) if g_start is None else np.array(g_start, dtype=float)
    records = []
    bundles = []
    ev = None
    for rho in sched.levels():
        level_prob = prob.with_rho(rho)
        g_prev = g
        g, rec, ev = minimize_at_rho(level_prob, spec, sched, g, g_anchor, prox_weight)
        if records:
            rec.drift = h1_norm(tg, grid, g - g_prev)
        rec.delta_violated = bool(rec.anchor_distance > sched.delta) if g_anchor is not None else False
        records.append(rec)
        if keep_levels:
            bundles.append(SolveBundle.from_evaluation(level_prob, spec, g, ev, g_anchor, prox_weight))
        if log is not None:
            log(rec)
    return OptimizeReport(levels=records, g=g, z=ev.state.z, rates=ev.state.rates,
                          q=ev.adjoint.q, xi=ev.adjoint.xi, bundles=bundles)
