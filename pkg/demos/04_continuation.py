"""
Optimal control with continuation in rho
========================================

A manufactured target comes from a known control.  Each level is minimized by
Barzilai-Borwein gradient descent in the H^1 metric and warm-starts the next
level.  In proximal mode, with the generating control as anchor, the
controls settle as rho decreases.
"""

# %%
import numpy as np

from ripvisc import (ContinuationSchedule, ObjectiveSpec, RegStateProblem, RISolveProblem, SmoothedAbs,
                     SpatialGrid, TimeGrid, continuation_solve, solve_rate_independent)

grid, tg = SpatialGrid(49), TimeGrid(100)
g_star = 2 * tg.t[:, None] * np.sin(np.pi * grid.x)[None, :]
z_star = solve_rate_independent(RISolveProblem(grid, tg), g_star).z
spec = ObjectiveSpec(alpha=1e4, beta=1e3, z_d=z_star, z_T=z_star[-1])
sched = ContinuationSchedule(rho_init=1e-1, factor=0.1, n_levels=4, inner_tol=1e-8, inner_max_iter=3000)


def show(rec):
    print(f"rho {rec.rho:7.1e}: {rec.iterations:4d} iterations, J = {rec.objective:.6e}, "
          f"|grad| = {rec.gradient_norm:.1e}")


# %%
rep = continuation_solve(RegStateProblem(grid, tg, SmoothedAbs(1e-1)), spec, sched, log=show)

# %%
prox = continuation_solve(RegStateProblem(grid, tg, SmoothedAbs(1e-1)), spec, sched,
                          g_anchor=g_star, prox_weight=1.0)
print("level-to-level drift in H^1(L^2):", ", ".join(f"{d:.3e}" for d in prox.drifts()))
