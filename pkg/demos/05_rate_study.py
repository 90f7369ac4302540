"""
Vanishing-viscosity rate
========================

The error ``max_t ||S(g) - S_rho(g)||_H1_0`` is measured against a
rate-independent reference computed on a refined time grid.  The predicted
order in rho is 1/2; smooth loads do better.
"""

# %%
import numpy as np

from ripvisc import SpatialGrid, TimeGrid, rate_study

grid, tg = SpatialGrid(199), TimeGrid(400)
for name, g in {"sine": lambda t, x: 2 * t * np.sin(np.pi * x),
                "bump": lambda t, x: 3 * t * np.exp(-((x - 0.4) / 0.2) ** 2)}.items():
    res = rate_study(g, tg, grid, [1e-1, 3e-2, 1e-2, 3e-3, 1e-3], workers=4)
    print(f"{name}: fitted constant {res.constant:.4f}")
    for row in res.rows:
        order = "" if row["order"] is None else f"order {row['order']:.3f}"
        print(f"   rho {row['rho']:7.1e}   error {row['error']:.3e}   {order}")
