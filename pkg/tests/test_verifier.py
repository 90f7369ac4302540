import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ripvisc import (ObjectiveSpec, RegStateProblem, RISolveProblem, SmoothedAbs, SolveBundle,
                     SpatialGrid, TimeGrid, evaluate, solve_rate_independent, solve_regularized)
from ripvisc.verifier import (SignThresholds, check_complementarity, check_estimates,
                              check_sign_conditions, combined_perturbation, multiplier_surrogate,
                              rate_study, stationarity_residual, tensor_basis,
                              very_weak_adjoint_residual, verify_kkt)

from scenarios import objective_family, ramp_bump, ramp_sine, wiggle


def bundle_at(grid, tg, rho, kind="mixed", g=None, gbar=None, prox=0.0):
    prob = RegStateProblem(grid, tg, SmoothedAbs(rho))
    spec = objective_family(tg, grid, kind)
    g = ramp_sine(tg, grid, 3.0) if g is None else g
    ev = evaluate(prob, spec, g, gbar, prox)
    return SolveBundle.from_evaluation(prob, spec, g, ev, gbar, prox)


def test_basis_shape_and_support(grid, tg):
    B = tensor_basis(tg, grid, 3, 4)
    assert B.shape == (12, tg.n_steps + 1, grid.n_interior)
    assert np.all(B[:, 0] == 0) and np.all(B[:, -1] == 0)
    S = tensor_basis(tg, grid, 2, 2, time_kind="sine")
    assert np.all(S[:, 0] == 0) and np.any(S[:, -1] != 0)
    with pytest.raises(ValueError):
        tensor_basis(tg, grid, time_kind="cosine")


def test_complementarity_trivial_cases(grid, tg):
    b = bundle_at(grid, tg, 1e-2)
    assert check_complementarity(tg, grid, b.z, tg.zeros(grid)) == 0.0
    assert check_complementarity(tg, grid, tg.zeros(grid), b.q) == 0.0
    assert 0.0 < check_complementarity(tg, grid, b.z, b.q) <= 1.0


def test_all_inactive_evolution_is_22c(grid, tg):
    g = 0.3 * ramp_sine(tg, grid, 1.0)
    z = solve_rate_independent(RISolveProblem(grid, tg), g).z
    assert np.all(z == 0)
    xi = wiggle(tg, grid, 1)
    stats = check_sign_conditions(tg, grid, z, g, wiggle(tg, grid, 2), xi)
    assert stats["22c"]["set_fraction"] == 1.0
    assert stats["22c"]["asserted"] is False
    assert stats["22c"]["mean_abs_xi"] == pytest.approx(np.mean(np.abs(xi[1:])))
    assert stats["22a"]["set_fraction"] == stats["22e"]["set_fraction"] == 0.0


def test_monotone_loading_lands_in_22a(grid, tg):
    g = ramp_bump(tg, grid)
    z = solve_rate_independent(RISolveProblem(grid, tg), g).z
    moving = np.diff(z, axis=0) > 1e-12
    stats = check_sign_conditions(tg, grid, z, g, tg.zeros(grid), tg.zeros(grid),
                                  SignThresholds(rate_eps=1e-12 / tg.tau))
    assert moving.any()
    assert stats["22a"]["set_fraction"] == pytest.approx(moving.mean())
    assert stats["22e"]["set_fraction"] == 0.0
    parts = sum(stats[k]["set_fraction"] for k in ("22a", "22b", "22c", "22d", "22e"))
    assert parts == pytest.approx(1.0)


def test_zero_multipliers_zero_violations(grid, tg):
    g = ramp_bump(tg, grid)
    z = solve_rate_independent(RISolveProblem(grid, tg), g).z
    stats = check_sign_conditions(tg, grid, z, g, tg.zeros(grid), tg.zeros(grid))
    for key in ("22a", "22c", "22e"):
        assert stats[key]["violation_fraction"] == 0.0
    for key in ("22b", "22d"):
        assert stats[key]["wrong_sign_fraction"] == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-8, 1.0), st.floats(1.0, 1e3), st.floats(1e-4, 0.5), st.floats(1.0, 10.0))
def test_threshold_monotonicity(rate_eps, grow, gap_eps, gap_grow):
    grid, tg = SpatialGrid(15), TimeGrid(20)
    b = bundle_at(grid, tg, 1e-2, g=ramp_sine(tg, grid, 3.0) + 0.5 * wiggle(tg, grid, 3))
    small = check_sign_conditions(tg, grid, b.z, b.g, b.q, b.xi, SignThresholds(rate_eps, gap_eps))
    large = check_sign_conditions(tg, grid, b.z, b.g, b.q, b.xi,
                                  SignThresholds(rate_eps * grow, gap_eps * gap_grow))
    for key in ("22a", "22e"):
        assert large[key]["violation_fraction"] <= small[key]["violation_fraction"]
        assert large[key]["set_fraction"] <= small[key]["set_fraction"]


@pytest.mark.parametrize("rho", [1e-1, 1e-3])
def test_very_weak_adjoint_identity(grid, tg, rho):
    b = bundle_at(grid, tg, rho)
    assert very_weak_adjoint_residual(tg, grid, b.spec, b.z, b.q, b.xi) <= 1e-8
    # a perturbed adjoint is detected
    q = b.q.copy()
    q[tg.n_steps // 2] *= 1.1
    assert very_weak_adjoint_residual(tg, grid, b.spec, b.z, q, b.xi) > 1e-6


@pytest.mark.parametrize("prox", [0.0, 1.0])
def test_stationarity_residual_is_gradient_norm(grid, tg, prox):
    gbar = wiggle(tg, grid, 5) if prox else None
    b = bundle_at(grid, tg, 1e-2, gbar=gbar, prox=prox)
    res = stationarity_residual(tg, grid, b.xi, b.g, gbar, prox)
    assert abs(res - b.gradient_norm) <= 1e-10 * max(1.0, b.gradient_norm)


def test_multiplier_surrogate_stays_bounded(grid, tg):
    vals = [multiplier_surrogate(tg, grid, bundle_at(grid, tg, rho).xi) for rho in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert max(vals) <= 5 * min(vals)


def test_rate_study_orders_and_threads():
    grid, tg = SpatialGrid(49), TimeGrid(100)
    rhos = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
    res = rate_study(lambda t, x: 2 * t * np.sin(np.pi * x), tg, grid, rhos)
    assert len(res.rows) == 5 and res.rows[0]["order"] is None
    assert all(a > b for a, b in zip(res.error, res.error[1:]))
    assert min(res.order) >= 0.4
    par = rate_study(lambda t, x: 2 * t * np.sin(np.pi * x), tg, grid, rhos, workers=3)
    assert par.error == res.error
    with pytest.raises(ValueError):
        rate_study(ramp_sine(tg, grid), tg, grid, [1e-2, 1e-1])


def test_combined_perturbation_ratio_bounded():
    grid, tg = SpatialGrid(29), TimeGrid(60)
    g = ramp_sine(tg, grid, 2.0)
    bump = wiggle(tg, grid, 7)
    rows = combined_perturbation(g, lambda rho: g + rho * bump, tg, grid, [1e-1, 1e-2, 1e-3])
    ratios = [r["ratio"] for r in rows]
    assert all(r["w11"] > 0 for r in rows)
    # the bound holds with a constant below one and does not degrade as rho shrinks
    assert max(ratios) < 1.0 and ratios[-1] <= 2 * ratios[0]


def test_estimates_on_ramp(grid, tg):
    b = bundle_at(grid, tg, 1e-2)
    checks = check_estimates(b, g_other=b.g + 0.2 * wiggle(tg, grid, 3))
    assert set(checks) == {"eq12", "eq25", "lemma46", "lemma45", "lemma414", "eq9", "eq8", "feasibility"}
    assert all(c.passed for c in checks.values()), {k: c.margin for k, c in checks.items()}
    assert checks["eq9"].detail["step_margins_min"] >= -1e-12


def test_lipschitz_degenerate_pair(grid, tg):
    b = bundle_at(grid, tg, 1e-2)
    c = check_estimates(b)["lemma45"]
    assert c.passed and c.lhs == c.rhs == 0.0
    c = check_estimates(b, g_other=b.g)["lemma45"]
    assert c.passed and c.lhs == 0.0


@pytest.mark.parametrize("rho", [1e-1, 1e-3])
def test_initial_rate_estimate_boundary_load(grid, tg, rho):
    g = ramp_sine(tg, grid, 1.0)
    g0 = np.tanh(30 * np.sin(2 * np.pi * grid.x))
    g = g + (g0 / np.max(np.abs(g0)))[None, :]
    g[:, :] = np.clip(g, -1.0, None)
    st_ = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(rho)), g)
    b = SolveBundle(grid, tg, rho, g, st_.z, st_.rates)
    c = check_estimates(b, tol=0.01)["eq25"]
    assert np.max(np.abs(g[0])) == pytest.approx(1.0)
    assert c.margin >= -0.01 and c.lhs > 0


def test_verify_zero_scenario(grid, tg):
    prob = RegStateProblem(grid, tg, SmoothedAbs(1e-1))
    ev = evaluate(prob, ObjectiveSpec(), tg.zeros(grid))
    b = SolveBundle.from_evaluation(prob, ObjectiveSpec(), tg.zeros(grid), ev)
    rep = verify_kkt(b)
    assert rep.complementarity_q == rep.stationarity == rep.very_weak_adjoint == 0.0
    assert rep.multiplier_surrogate == 0.0 and rep.estimates_passed


def test_verify_is_deterministic(grid, tg):
    b = bundle_at(grid, tg, 1e-2)
    assert verify_kkt(b).to_dict() == verify_kkt(b).to_dict()


def test_verify_needs_adjoint(grid, tg):
    st_ = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(0.1)), ramp_sine(tg, grid))
    with pytest.raises(ValueError):
        verify_kkt(SolveBundle(grid, tg, 0.1, ramp_sine(tg, grid), st_.z, st_.rates))
