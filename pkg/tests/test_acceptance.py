"""Acceptance criteria 1-9.  Each test prints one PASS/FAIL line with the measured values."""

import time

import numpy as np
import pytest

from ripvisc import (ContinuationSchedule, RegStateProblem, RISolveProblem, SmoothedAbs, SolveBundle,
                     SpatialGrid, TimeGrid, check_complementarity, check_estimates, continuation_solve,
                     grad_check, rate_study, scalar_play, solve_rate_independent, solve_regularized)
from ripvisc.discretization import bochner_norms, laplacian_solve, norm_h10
from ripvisc.smoothed_abs import assumption_slacks
from ripvisc.verifier import stationarity_residual

from scenarios import manufactured, objective_family, ramp_bump, ramp_sine, wiggle


@pytest.fixture
def report(capsys):
    def emit(number, ok, text):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'}  {text}")
        return ok
    return emit


@pytest.fixture(scope="module")
def sweep():
    """Continuation over four levels on the manufactured tracking scenario."""
    grid, tg = SpatialGrid(49), TimeGrid(100)
    spec, g_star = manufactured(tg, grid)
    sched = ContinuationSchedule(1e-1, 0.1, 4, inner_tol=1e-8, inner_max_iter=3000)
    start = time.perf_counter()
    rep = continuation_solve(RegStateProblem(grid, tg, SmoothedAbs(1e-1)), spec, sched, keep_levels=True)
    return grid, tg, spec, g_star, sched, rep, time.perf_counter() - start


def test_1_vanishing_viscosity_rate(report):
    grid, tg = SpatialGrid(199), TimeGrid(400)
    rhos = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
    loads = {"sine": lambda t, x: 2 * t * np.sin(np.pi * x),
             "bump": lambda t, x: 3 * t * np.exp(-((x - 0.4) / 0.2) ** 2)}
    start = time.perf_counter()
    studies = {k: rate_study(g, tg, grid, rhos, workers=4) for k, g in loads.items()}
    elapsed = time.perf_counter() - start
    min_order = min(min(s.order) for s in studies.values())
    consts = [s.constant for s in studies.values()]
    spread = max(consts) / min(consts)
    ok = min_order >= 0.4 and spread <= 2.0 and elapsed <= 120
    assert report(1, ok, f"min order {min_order:.3f} (>= 0.4), constants {consts[0]:.4f}/{consts[1]:.4f} "
                         f"spread {spread:.3f} (<= 2), {elapsed:.1f}s (<= 120)")


def test_2_a_priori_estimates(report):
    grid, tg = SpatialGrid(49), TimeGrid(100)
    start = time.perf_counter()
    # energy estimate at every step of the reference solver, on monotone and oscillating loads
    eq9 = []
    for g in (ramp_bump(tg, grid), ramp_sine(tg, grid, 3.0) + 2.5 * wiggle(tg, grid, 4)):
        st = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(1e-1)), g)
        eq9.append(check_estimates(SolveBundle(grid, tg, 1e-1, g, st.z, st.rates))["eq9"]
                   .detail["step_margins_min"])
    # initial rate bound for initial loads touching the threshold
    g0 = np.tanh(30 * np.sin(2 * np.pi * grid.x))
    g_b = ramp_sine(tg, grid, 1.0) + (g0 / np.max(np.abs(g0)))[None, :]
    eq25, l46 = [], []
    for rho in (1e-1, 1e-2, 1e-3, 1e-4):
        st = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(rho)), g_b)
        eq25.append(check_estimates(SolveBundle(grid, tg, rho, g_b, st.z, st.rates), tol=0.01)["eq25"].margin)
        g = ramp_sine(tg, grid, 3.0)
        st = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(rho)), g)
        l46.append(check_estimates(SolveBundle(grid, tg, rho, g, st.z, st.rates))["lemma46"].margin)
    elapsed = time.perf_counter() - start
    ok = min(eq9) >= -0.05 and min(eq25) >= -0.01 and min(l46) >= -0.05
    assert report(2, ok, f"energy step margin min {min(eq9):+.4f} (>= -0.05), initial-rate margin min "
                         f"{min(eq25):+.4f} (>= -0.01), rate bound margin min {min(l46):+.4f}, {elapsed:.1f}s")


def test_3_smoothed_abs_axioms(report):
    rng = np.random.default_rng(2024)
    worst = {}
    rhos = 10.0 ** rng.uniform(-6, 1, size=200)
    for rho in rhos:
        v = rho * rng.uniform(-3, 3, size=5000)
        for k, val in assumption_slacks(SmoothedAbs(rho), v).items():
            worst[k] = max(worst.get(k, -np.inf), val)
    w = max(worst.values())
    assert report(3, w <= 1e-12, f"10^6 samples, worst slack {w:.2e} (<= 1e-12) at '{max(worst, key=worst.get)}'")


def test_4_gradient_exactness(report):
    grid, tg = SpatialGrid(29), TimeGrid(40)
    g = ramp_sine(tg, grid, 3.0) + 0.3 * wiggle(tg, grid, 1)
    h = np.random.default_rng(0).standard_normal(g.shape)
    h[0] = 0
    start = time.perf_counter()
    errs = {}
    for kind in ("tracking", "terminal", "mixed"):
        for rho in (1e-1, 1e-2):
            prob = RegStateProblem(grid, tg, SmoothedAbs(rho), newton_tol=1e-12)
            (row,) = grad_check(prob, objective_family(tg, grid, kind), g, h, eps_list=(1e-4,))
            errs[(kind, rho)] = row.rel_error
    elapsed = time.perf_counter() - start
    worst = max(errs.values())
    ok = worst <= 1e-6 and elapsed <= 60
    assert report(4, ok, f"worst rel error {worst:.2e} at {max(errs, key=errs.get)} (<= 1e-6), {elapsed:.1f}s")


def test_5_stationarity(report, sweep):
    grid, tg, _, _, sched, rep, _ = sweep
    b = rep.bundles[-1]
    res = stationarity_residual(tg, grid, b.xi, b.g, b.g_anchor, b.prox_weight)
    gap = abs(res - b.gradient_norm)
    ok = gap <= 1e-10 and res <= 1e-8 and rep.levels[-1].converged
    assert report(5, ok, f"residual {res:.3e} (<= 1e-8), |residual - gradient norm| {gap:.1e} (<= 1e-10)")


def test_6_complementarity_decay(report, sweep):
    grid, tg, _, _, _, rep, elapsed = sweep
    vals = [check_complementarity(tg, grid, b.z, b.q) for b in rep.bundles]
    monotone = all(a > b for a, b in zip(vals, vals[1:]))
    ratio = vals[-1] / vals[0]
    ok = monotone and ratio <= 0.1 and elapsed <= 300 and all(r.converged for r in rep.levels)
    assert report(6, ok, "residuals " + ", ".join(f"{v:.3e}" for v in vals)
                  + f"; final/first {ratio:.3f} (<= 0.1), {elapsed:.1f}s")


def test_7_adjoint_bounds(report, sweep):
    grid, tg, _, _, _, rep, _ = sweep
    margins, scaled = [], []
    for b in rep.bundles:
        margins.append(check_estimates(b, tol=0.0)["lemma414"].margin)
        scaled.append(np.sqrt(b.rho) * bochner_norms(tg, grid, b.xi).l2_h10)
    bounded = max(scaled[1:]) <= scaled[0]
    ok = min(margins) >= 0.0 and bounded
    assert report(7, ok, f"adjoint bound margin min {min(margins):+.3f} with C=(1+T)e^T; "
                         "rho^1/2 |xi| " + ", ".join(f"{s:.3f}" for s in scaled))


def test_8_oracles(report):
    grid, tg = SpatialGrid(49), TimeGrid(200)
    g = ramp_bump(tg, grid)
    z_ri = solve_rate_independent(RISolveProblem(grid, tg), g).z
    z_reg = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(1e-6)), g).z
    gap = float(np.max(norm_h10(grid, z_ri - z_reg)))
    grid1, tg1 = SpatialGrid(31), TimeGrid(300)
    s = 3.0 * np.sin(2 * np.pi * tg1.t) + 0.5 * tg1.t
    st = solve_rate_independent(RISolveProblem(grid1, tg1), s[:, None] * np.ones(grid1.n_interior)[None, :])
    psi = -laplacian_solve(grid1, np.ones(grid1.n_interior))
    one = float(np.max(np.abs(st.z - scalar_play(s, 1.0)[:, None] * psi[None, :])))
    ok = gap <= 1e-3 and one <= 1e-8
    assert report(8, ok, f"reference vs rho=1e-6 {gap:.2e} (<= 1e-3), one-mode vs scalar play {one:.1e} (<= 1e-8)")


def test_9_minimizer_convergence(report):
    grid, tg = SpatialGrid(49), TimeGrid(100)
    spec, g_star = manufactured(tg, grid)
    sched = ContinuationSchedule(1e-1, 0.1, 4, inner_tol=1e-8, inner_max_iter=3000)
    rep = continuation_solve(RegStateProblem(grid, tg, SmoothedAbs(1e-1)), spec, sched,
                             g_anchor=g_star, prox_weight=1.0)
    d = rep.drifts()
    ok = len(rep.levels) >= 4 and all(a > b for a, b in zip(d, d[1:]))
    assert report(9, ok, f"{len(rep.levels)} levels, drifts " + ", ".join(f"{x:.3e}" for x in d))
