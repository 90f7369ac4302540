"""
Auditing an optimality system
=============================

``verify_kkt`` takes a solve bundle and reports several checks: the
complementarity residual, sign-condition statistics, the very-weak adjoint
identity, the stationarity residual, and the a-priori estimates.
"""

# %%
import numpy as np

from ripvisc import (ContinuationSchedule, ObjectiveSpec, RegStateProblem, RISolveProblem, SmoothedAbs,
                     SpatialGrid, TimeGrid, continuation_solve, solve_rate_independent, verify_kkt)

grid, tg = SpatialGrid(49), TimeGrid(100)
g_star = 2 * tg.t[:, None] * np.sin(np.pi * grid.x)[None, :]
z_star = solve_rate_independent(RISolveProblem(grid, tg), g_star).z
spec = ObjectiveSpec(alpha=1e4, beta=1e3, z_d=z_star, z_T=z_star[-1])
sched = ContinuationSchedule(1e-1, 0.1, 4, inner_tol=1e-8, inner_max_iter=3000)
rep = continuation_solve(RegStateProblem(grid, tg, SmoothedAbs(1e-1)), spec, sched, keep_levels=True)

# %%
for b in rep.bundles:
    r = verify_kkt(b)
    print(f"rho {b.rho:7.1e}: complementarity {r.complementarity_q:.3e}, "
          f"stationarity {r.stationarity:.1e}, very weak {r.very_weak_adjoint:.1e}")

# %%
final = verify_kkt(rep.bundles[-1])
for name, c in final.estimate_checks.items():
    print(f"{name:12s} lhs {c.lhs:.4e}  rhs {c.rhs:.4e}  margin {c.margin:+.3f}  {'ok' if c.passed else 'FAIL'}")
for key, stats in final.sign_condition_stats.items():
    print(key, stats)
