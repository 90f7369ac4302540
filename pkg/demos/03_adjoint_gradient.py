"""
Adjoint and reduced gradient
============================

The adjoint is the exact transpose of the time-stepping scheme, so the
gradient agrees with central differences up to rounding error.
"""

# %%
import numpy as np

from ripvisc import (ObjectiveSpec, RegStateProblem, SmoothedAbs, SpatialGrid, TimeGrid, evaluate,
                     grad_check)

grid, tg = SpatialGrid(29), TimeGrid(40)
t, x = tg.t[:, None], grid.x[None, :]
spec = ObjectiveSpec(alpha=50.0, beta=20.0, z_d=0.05 * t * np.sin(np.pi * x),
                     z_T=0.02 * np.ones(grid.n_interior))
g = 3 * t * np.sin(np.pi * x)
prob = RegStateProblem(grid, tg, SmoothedAbs(1e-2))

ev = evaluate(prob, spec, g)
print(f"objective {ev.objective:.8f}, gradient norm {ev.gradient_norm:.6f}")

# %%
h = np.random.default_rng(1).standard_normal(g.shape)
h[0] = 0.0
for row in grad_check(prob, spec, g, h, eps_list=(1e-2, 1e-3, 1e-4, 1e-5)):
    print(f"eps {row.eps:7.1e}   fd {row.finite_difference:+.12e}   "
          f"adjoint {row.adjoint:+.12e}   rel {row.rel_error:.1e}")

# %%
# At g = 0 every rate sits at the kink of the third derivative of |.|_rho, so
# central differences only converge at first order there.
(row,) = grad_check(prob, spec, tg.zeros(grid), h, eps_list=(1e-4,))
print("at g = 0: rel error", f"{row.rel_error:.1e}")
