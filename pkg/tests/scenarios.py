"""Small reusable loads and objectives for the test-suite."""

import numpy as np

from ripvisc import ObjectiveSpec, RISolveProblem, solve_rate_independent


def ramp_sine(tg, grid, slope=2.0):
    return slope * tg.t[:, None] * np.sin(np.pi * grid.x / grid.L)[None, :]


def ramp_bump(tg, grid, slope=3.0, center=0.4, width=0.2):
    prof = np.exp(-(((grid.x - center) / width) ** 2)) * np.sin(np.pi * grid.x / grid.L)
    return slope * tg.t[:, None] * prof[None, :]


def wiggle(tg, grid, seed=0, amp=1.0):
    """Smooth random control with g(0) = 0."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((3, 3))
    out = np.zeros((tg.n_steps + 1, grid.n_interior))
    for a in range(3):
        for b in range(3):
            out += c[a, b] * np.sin((a + 0.5) * np.pi * tg.t / tg.T)[:, None] \
                * np.sin((b + 1) * np.pi * grid.x / grid.L)[None, :]
    return amp * out


def manufactured(tg, grid, alpha=1e4, beta=1e3, slope=2.0):
    """Targets generated by the reference state of ``ramp_sine``; returns (spec, g_star)."""
    g_star = ramp_sine(tg, grid, slope)
    z = solve_rate_independent(RISolveProblem(grid, tg), g_star).z
    return ObjectiveSpec(alpha=alpha, beta=beta, z_d=z, z_T=z[-1]), g_star


def objective_family(tg, grid, kind):
    """The three grad-check scenarios: distributed tracking, terminal only, both."""
    target = 0.05 * np.sin(np.pi * grid.x)[None, :] * np.sin(0.5 * np.pi * tg.t)[:, None]
    if kind == "tracking":
        return ObjectiveSpec(alpha=50.0, beta=0.0, z_d=target)
    if kind == "terminal":
        return ObjectiveSpec(alpha=0.0, beta=50.0, z_T=target[-1])
    if kind == "mixed":
        return ObjectiveSpec(alpha=50.0, beta=20.0, z_d=target, z_T=-target[-1])
    raise ValueError(kind)
