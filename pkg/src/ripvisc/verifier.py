"""Numerical audits of the limiting optimality system and the a-priori estimates.

Distributional identities are tested against a finite basis of smooth
space-time tensor products.  Nothing here changes a solution; every audit is a
deterministic function of its inputs.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .adjoint import AdjointPair, adjoint_bound_terms
from .discretization import (TimeGrid, bochner_norms, laplacian_apply, norm_h10,
                             norm_hm1, time_difference)
from .smoothed_abs import SmoothedAbs
from .state import (RISolveProblem, RegStateProblem, RegularizedState,
                    solve_rate_independent, solve_regularized, t_rho_solve)

TOL_DISCRETIZATION = 0.05


def smooth_bump(s, center, halfwidth):
    """C-infinity bump with peak 1 supported on ``|s - center| < halfwidth``."""
    r = (np.asarray(s, dtype=float) - center) / halfwidth
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def tensor_basis(tg, grid, n_time=5, n_space=5, time_kind="bump"):
    """Array of shape ``(n_time * n_space, N + 1, n)`` of tensor-product test functions.

    Space factors are bumps vanishing at the boundary.  ``time_kind="bump"``
    uses bumps compactly supported in (0, T); ``"sine"`` uses
    ``sin((a - 1/2) pi t / T)``, which vanish at t = 0 but not at t = T.
    """
    hw_x = grid.L / (n_space + 1)
    space = [smooth_bump(grid.x, b * hw_x, hw_x) for b in range(1, n_space + 1)]
    if time_kind == "bump":
        hw_t = tg.T / (n_time + 1)
        time = [smooth_bump(tg.t, a * hw_t, hw_t) for a in range(1, n_time + 1)]
    elif time_kind == "sine":
        time = [np.sin((a - 0.5) * np.pi * tg.t / tg.T) for a in range(1, n_time + 1)]
    else:
        raise ValueError(f"unknown time_kind {time_kind!r}")
    return np.array([np.outer(th, ps) for th in time for ps in space])


def _w1inf_space(grid, phi):
    padded = np.pad(phi, [(0, 0)] * (phi.ndim - 1) + [(1, 1)])
    grad = np.abs(np.diff(padded, axis=-1)).max() / grid.h
    return np.abs(phi).max() + grad


def _rates(tg, z):
    w = np.zeros_like(z)
    w[1:] = time_difference(tg, z)
    return w


def complementarity_pairings(tg, grid, z, q, basis):
    """``tau * sum_k <q_k, phi_k |w_k|>`` for each basis function (k >= 1)."""
    aw = np.abs(_rates(tg, z))[1:]
    return tg.tau * grid.h * np.einsum("ki,bki->b", q[1:] * aw, basis[:, 1:])


def check_complementarity(tg, grid, z, q, basis=None):
    """Normalized complementarity residual ``max_phi |<q, phi |z_t|>|``.

    Each pairing is divided by ``||phi||_{L^inf(W^1,inf)} ||q||_{L^inf(H^-1)}
    ||z_t||_{L^1(H^1_0)}``, a rho-uniform bound on its size, so the result is
    a dimensionless number of order at most one.
    """
    if basis is None:
        basis = tensor_basis(tg, grid)
    pair = complementarity_pairings(tg, grid, z, q, basis)
    w = _rates(tg, z)
    scale_q = np.max(norm_hm1(grid, q))
    scale_w = tg.tau * np.sum(norm_h10(grid, w[1:]))
    if scale_q == 0.0 or scale_w == 0.0:
        return 0.0
    phi_scale = np.array([_w1inf_space(grid, phi) for phi in basis])
    return float(np.max(np.abs(pair) / (phi_scale * scale_q * scale_w)))


@dataclass
class SignThresholds:
    rate_eps: float = None  # default 1e-6 * max|w|
    gap_eps: float = 1e-3
    value_eps: float = None  # default 1e-3 * max of |q| (resp. |xi|)


def check_sign_conditions(tg, grid, z, g, q, xi, thresholds=None):
    """Classify space-time nodes (k >= 1) by the formal sign conditions.

    Sets: ``a`` moving up, ``e`` moving down (by ``|w| > rate_eps`` only), and
    for stationary nodes ``b``/``d`` at the upper/lower threshold and ``c``
    interior (``|1 - |lam|| > gap_eps``).  Fractions are counts over all
    classified nodes, so growing a threshold can only shrink the ``a``/``e``
    counts.  For ``b``/``d`` only wrong-sign counts are reported.
    """
    th = thresholds or SignThresholds()
    w = _rates(tg, z)[1:]
    lam = (laplacian_apply(grid, z) + g)[1:]
    q, xi = q[1:], xi[1:]
    wmax = np.max(np.abs(w))
    rate_eps = th.rate_eps if th.rate_eps is not None else 1e-6 * wmax
    q_eps = th.value_eps if th.value_eps is not None else 1e-3 * np.max(np.abs(q), initial=0.0)
    xi_eps = th.value_eps if th.value_eps is not None else 1e-3 * np.max(np.abs(xi), initial=0.0)
    total = w.size
    up = w > rate_eps
    down = w < -rate_eps
    still = ~(up | down)
    interior = still & (np.abs(1.0 - np.abs(lam)) > th.gap_eps)
    upper = still & ~interior & (lam > 0)
    lower = still & ~interior & (lam < 0)

    def mean_abs(a, mask):
        return float(np.mean(np.abs(a[mask]))) if mask.any() else 0.0

    def frac(mask):
        return float(np.count_nonzero(mask) / total)

    return {
        "22a": {"set_fraction": frac(up), "violation_fraction": frac(up & (np.abs(q) > q_eps)),
                "mean_abs_q": mean_abs(q, up)},
        "22b": {"set_fraction": frac(upper),
                "wrong_sign_fraction": frac(upper & ((q < -q_eps) | (xi < -xi_eps)))},
        "22c": {"set_fraction": frac(interior),
                "violation_fraction": frac(interior & (np.abs(xi) > xi_eps)),
                "mean_abs_xi": mean_abs(xi, interior), "asserted": False},
        "22d": {"set_fraction": frac(lower),
                "wrong_sign_fraction": frac(lower & ((q > q_eps) | (xi > xi_eps)))},
        "22e": {"set_fraction": frac(down), "violation_fraction": frac(down & (np.abs(q) > q_eps)),
                "mean_abs_q": mean_abs(q, down)},
        "thresholds": {"rate_eps": float(rate_eps), "gap_eps": th.gap_eps,
                       "q_eps": float(q_eps), "xi_eps": float(xi_eps)},
    }


def very_weak_adjoint_residual(tg, grid, spec, z, q, xi, basis=None):
    """Relative residual of the time-integrated adjoint equation over test functions.

    For each ``phi`` with ``phi(0) = 0``:
    ``tau sum <q_k, (phi_k - phi_{k-1})/tau> - tau sum <phi_{k-1}, L xi_k>
    = <j2', phi_N> + tau sum_{k<N} <j1'_k, phi_k>``.
    """
    if basis is None:
        basis = tensor_basis(tg, grid, time_kind="sine")
    j1 = spec.j1_derivative(tg, grid, z)
    j2 = spec.j2_derivative(grid, z[-1])
    Lxi = laplacian_apply(grid, xi)
    worst = 0.0
    for phi in basis:
        a = tg.tau * np.sum(grid.inner(q[1:], time_difference(tg, phi)))
        b = tg.tau * np.sum(grid.inner(phi[:-1], Lxi[1:]))
        c = grid.inner(j2, phi[-1])
        d = tg.tau * np.sum(grid.inner(j1[:-1], phi[:-1]))
        scale = abs(a) + abs(b) + abs(c) + abs(d)
        if scale > 0:
            worst = max(worst, abs(a - b - c - d) / scale)
    return float(worst)


def _h1_time_matrix(tg):
    # assembled from the quadrature definition: mass on nodes 1..N-1, differences 1..N
    n, tau = tg.n_steps, tg.tau
    mass = np.ones(n)
    mass[-1] = 0.0
    D = sp.diags([np.ones(n), -np.ones(n - 1)], [0, -1], format="csc")
    return (tau * sp.diags(mass) + (D.T @ D) / tau).tocsc()


def stationarity_residual(tg, grid, xi, g, g_anchor=None, prox_weight=0.0):
    """Dual norm in ``H^1_*(I; L^2)`` of ``h -> <xi, h>_{L^2(Q)} + <(1+p) g - p g_bar, h>_{H^1}``."""
    c = (1.0 + prox_weight) * g
    if prox_weight and g_anchor is not None:
        c = c - prox_weight * g_anchor
    M = _h1_time_matrix(tg)
    ell = tg.tau * xi[1:] + M @ c[1:]
    ell[0] -= c[0] / tg.tau  # difference term coupling to c_0 when the anchor does not vanish at t = 0
    sol = splu(M).solve(ell)
    return float(np.sqrt(max(grid.h * np.sum(ell * sol), 0.0)))


def multiplier_surrogate(tg, grid, xi, n_time=5):
    """``max_a ||tau sum_k xi_k theta_a(t_k)||_{H^1_0}`` over smooth time bumps."""
    hw = tg.T / (n_time + 1)
    vals = []
    for a in range(1, n_time + 1):
        th = smooth_bump(tg.t, a * hw, hw)
        vals.append(norm_h10(grid, tg.tau * np.sum(th[1:, None] * xi[1:], axis=0)))
    return float(max(vals))


def _interp_in_time(g, tg, fine):
    return np.array([np.interp(fine.t, tg.t, col) for col in g.T]).T


def _reference(g, tg, grid, refine):
    """Reference rate-independent solution on a refined time grid, sampled on ``tg``."""
    fine = TimeGrid(tg.n_steps * refine, tg.T)
    gf = g(fine.t[:, None], grid.x[None, :]) if callable(g) else _interp_in_time(g, tg, fine)
    ri = solve_rate_independent(RISolveProblem(grid, fine), gf)
    norms = bochner_norms(fine, grid, ri.z)
    zt = time_difference(fine, ri.z)
    h1 = np.sqrt(norms.l2_h10**2 + fine.tau * np.sum(norm_h10(grid, zt) ** 2))
    return ri.z[::refine], float(h1)


@dataclass
class RateStudy:
    rho: list
    error: list
    order: list
    z_h1_h10: float
    constant: float  # smallest C with e <= C (1 + ||z||) rho^(1/2) on all rho
    rows: list = field(default_factory=list)


def rate_study(g, tg, grid, rho_list, refine=2, newton_tol=1e-10, workers=1):
    """Errors ``||S(g) - S_rho(g)||_{C(H^1_0)}`` and pairwise empirical orders.

    ``g`` is either a trajectory on ``tg`` or a callable ``g(t, x)``.  The
    regularized solves are independent and may run on ``workers`` threads;
    results keep the order of ``rho_list``.
    """
    rho_list = [float(r) for r in rho_list]
    if len(rho_list) < 2 or any(a <= b for a, b in zip(rho_list, rho_list[1:])):
        raise ValueError("rho_list must be strictly decreasing with at least two entries")
    gc = g(tg.t[:, None], grid.x[None, :]) if callable(g) else tg.check(g, grid)
    z_ref, z_h1 = _reference(g, tg, grid, refine)

    def error(rho):
        st = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(rho), newton_tol), gc)
        return float(np.max(norm_h10(grid, st.z - z_ref)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(error, rho_list))
    else:
        errors = [error(rho) for rho in rho_list]
    e, r = np.array(errors), np.array(rho_list)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = list(np.log(e[:-1] / e[1:]) / np.log(r[:-1] / r[1:]))
    constant = float(np.max(e / ((1.0 + z_h1) * np.sqrt(r))))
    rows = [{"rho": rho, "error": err, "order": (orders[i - 1] if i else None)}
            for i, (rho, err) in enumerate(zip(rho_list, errors))]
    return RateStudy(rho_list, errors, [float(o) for o in orders], z_h1, constant, rows)


def combined_perturbation(g, g_perturbed, tg, grid, rho_list, refine=2, newton_tol=1e-10):
    """Ratios ``||S(g) - S_rho(g_rho)|| / ((1 + ||z||) rho^(1/2) + ||g - g_rho||_{W^1,1(H^-1)})``.

    ``g_perturbed(rho)`` returns the perturbed load trajectory on ``tg``.
    """
    gc = g(tg.t[:, None], grid.x[None, :]) if callable(g) else tg.check(g, grid)
    z_ref, z_h1 = _reference(g, tg, grid, refine)
    rows = []
    for rho in rho_list:
        gr = g_perturbed(rho)
        st = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(rho), newton_tol), gr)
        err = float(np.max(norm_h10(grid, st.z - z_ref)))
        w11 = bochner_norms(tg, grid, gc - gr).w11_hm1
        bound = (1.0 + z_h1) * np.sqrt(rho) + w11
        rows.append({"rho": rho, "error": err, "w11": w11, "ratio": err / bound})
    return rows


@dataclass
class EstimateCheck:
    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    detail: dict = field(default_factory=dict)


def _margin(lhs, rhs):
    if rhs == 0.0:
        return 0.0 if lhs <= 0.0 else -np.inf
    return (rhs - lhs) / rhs


def _make(name, lhs_value, rhs_value, tol, **detail):
    m = _margin(lhs_value, rhs_value)
    return EstimateCheck(name, float(lhs_value), float(rhs_value), float(m), bool(m >= -tol), detail)


def check_estimates(bundle, g_other=None, tol=TOL_DISCRETIZATION, orthogonality_tol=None):
    """Evaluate each a-priori inequality in discrete form; returns ``{name: EstimateCheck}``.

    Margins are ``(rhs - lhs) / rhs``; a check fails only when the margin is
    below ``-tol``.  ``g_other`` supplies the second control for the
    Lipschitz estimate (defaults to ``bundle.g``, the degenerate pair).
    """
    grid, tg, rho = bundle.grid, bundle.tg, bundle.rho
    prob = bundle.problem()
    sabs = prob.sabs
    L = grid.meas
    g = bundle.g
    checks = {}

    # smoothed modulus bounds on the computed rates
    w = bundle.rates[1:].ravel()
    a = np.abs(w)
    slack = min(np.min(sabs.value(w) - a), np.min(a + rho - sabs.value(w)),
                np.min(sabs.first(w) * w - a + rho))
    checks["eq12"] = EstimateCheck("eq12", 0.0, rho, float(slack / rho), bool(slack >= -1e-12 * rho))

    # initial rate from the compatible initial load
    w0 = t_rho_solve(prob, g[0], 0.0)
    checks["eq25"] = _make("eq25", norm_h10(grid, w0) ** 2, L, tol)

    # rho-uniform energy bound for the regularized rates
    rates = bundle.rates[1:]
    h10 = norm_h10(grid, rates)
    lhs46 = rho * h10[-1] ** 2 + tg.tau * np.sum(h10**2)
    rhs46 = tg.tau * np.sum(norm_hm1(grid, time_difference(tg, g)) ** 2) + 3.0 * rho * L
    checks["lemma46"] = _make("lemma46", lhs46, rhs46, tol)

    # uniform Lipschitz estimate
    if g_other is None:
        checks["lemma45"] = _make("lemma45", 0.0, 0.0, tol, degenerate=True)
    else:
        z2 = solve_regularized(prob, g_other).z
        dg = g_other - g
        lhs45 = np.max(norm_h10(grid, z2 - bundle.z))
        rhs45 = 2.0 * (np.sum(norm_hm1(grid, np.diff(dg, axis=0))) + np.max(norm_hm1(grid, dg)))
        checks["lemma45"] = _make("lemma45", lhs45, rhs45, tol)

    # adjoint bound with the Gronwall constant
    if bundle.q is not None and bundle.spec is not None:
        st = RegularizedState(bundle.z, bundle.rates, rho)
        terms = adjoint_bound_terms(prob, bundle.spec, st, AdjointPair(bundle.q, bundle.xi))
        C = (1.0 + tg.T) * np.exp(tg.T)
        checks["lemma414"] = _make("lemma414", terms["lhs"], C * terms["data"], tol, **terms)

    # unregularized energy identities on the reference solution
    ri = solve_rate_independent(RISolveProblem(grid, tg), g)
    wr = ri.rates(tg)[1:]
    gdot = time_difference(tg, g)
    lhs9 = norm_h10(grid, wr)
    rhs9 = norm_hm1(grid, gdot)
    margins = np.array([_margin(lv, rv) for lv, rv in zip(lhs9, rhs9)])
    worst = int(np.argmin(margins))
    checks["eq9"] = EstimateCheck("eq9", float(lhs9[worst]), float(rhs9[worst]),
                                  float(margins[worst]), bool(margins[worst] >= -tol),
                                  {"step_margins_min": float(margins.min())})
    defect = tg.tau * abs(np.sum(grid.inner(wr, laplacian_apply(grid, wr) + gdot)))
    scale = tg.tau * np.sum(lhs9 * rhs9)
    otol = orthogonality_tol if orthogonality_tol is not None else max(tol, 10.0 * tg.tau)
    checks["eq8"] = _make("eq8", defect, otol * scale, 0.0,
                          relative_defect=float(defect / scale) if scale else 0.0, tolerance=otol)
    feas = float(np.max(np.abs(ri.lam)))
    checks["feasibility"] = _make("feasibility", feas, 1.0 + 1e-10, 0.0)
    return checks


@dataclass
class KktReport:
    complementarity_q: float
    stationarity: float
    very_weak_adjoint: float
    sign_condition_stats: dict
    estimate_checks: dict
    multiplier_surrogate: float
    gradient_norm: float = None

    def to_dict(self):
        d = asdict(self)
        d["estimate_checks"] = {k: asdict(v) for k, v in self.estimate_checks.items()}
        return d

    @property
    def estimates_passed(self):
        return all(c.passed for c in self.estimate_checks.values())


def verify_kkt(bundle, n_time=5, n_space=5, thresholds=None, g_other=None, tol=TOL_DISCRETIZATION):
    grid, tg = bundle.grid, bundle.tg
    if bundle.q is None or bundle.spec is None:
        raise ValueError("bundle lacks adjoint variables or objective")
    comp = check_complementarity(tg, grid, bundle.z, bundle.q,
                                 tensor_basis(tg, grid, n_time, n_space))
    stat = stationarity_residual(tg, grid, bundle.xi, bundle.g, bundle.g_anchor, bundle.prox_weight)
    vw = very_weak_adjoint_residual(tg, grid, bundle.spec, bundle.z, bundle.q, bundle.xi,
                                    tensor_basis(tg, grid, n_time, n_space, time_kind="sine"))
    signs = check_sign_conditions(tg, grid, bundle.z, bundle.g, bundle.q, bundle.xi, thresholds)
    est = check_estimates(bundle, g_other=g_other, tol=tol)
    return KktReport(comp, stat, vw, signs, est, multiplier_surrogate(tg, grid, bundle.xi, n_time),
                     bundle.gradient_norm)
