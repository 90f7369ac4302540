"""
Forward solvers: viscous and rate-independent
=============================================

The viscous state ``S_rho(g)`` comes from implicit Euler plus Newton.  The
rate-independent state ``S(g)`` comes from a primal-dual active set method
applied to each increment.  As ``rho`` shrinks, the two agree.
"""

# %%
import numpy as np

from ripvisc import (RegStateProblem, RISolveProblem, SmoothedAbs, SpatialGrid, TimeGrid,
                     scalar_play, solve_rate_independent, solve_regularized)
from ripvisc.discretization import laplacian_solve, norm_h10

grid, tg = SpatialGrid(49), TimeGrid(200)
t, x = tg.t[:, None], grid.x[None, :]
g = 3 * t * np.exp(-((x - 0.4) / 0.2) ** 2)     # a load that pushes past the threshold

ri = solve_rate_independent(RISolveProblem(grid, tg), g)
print("reference: total PDAS iterations", ri.pdas_iterations, ", dual fallbacks", ri.fallback_steps)
print("max |driving force| =", np.max(np.abs(ri.lam)), "(at most 1 up to rounding)")

# %%
for rho in (1e-1, 1e-2, 1e-3, 1e-6):
    st = solve_regularized(RegStateProblem(grid, tg, SmoothedAbs(rho)), g)
    gap = np.max(norm_h10(grid, st.z - ri.z))
    print(f"rho = {rho:7.1e}   max_t ||z_rho - z||_H1_0 = {gap:.3e}")

# %%
# A spatially constant load keeps the driving force uniform, so the state is
# the scalar play of the load amplitude times a fixed profile.
grid1, tg1 = SpatialGrid(31), TimeGrid(300)
s = 3.0 * np.sin(2 * np.pi * tg1.t) + 0.5 * tg1.t
z = solve_rate_independent(RISolveProblem(grid1, tg1), s[:, None] * np.ones((1, 31))).z
profile = -laplacian_solve(grid1, np.ones(31))
print("one-mode mismatch:", np.max(np.abs(z - scalar_play(s, 1.0)[:, None] * profile[None, :])))
