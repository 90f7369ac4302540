"""
The smoothed modulus
====================

The dissipation ``|v|`` is replaced by a C^2 function ``|v|_rho`` that agrees
with ``|v|`` outside ``(-rho, rho)``.  Its second derivative is a hat of
height ``2 / rho``.
"""

# %%
import numpy as np

from ripvisc import SmoothedAbs
from ripvisc.smoothed_abs import assumption_slacks

s = SmoothedAbs(0.1)
v = np.linspace(-0.2, 0.2, 9)
for vi, a, d1, d2 in zip(v, s.value(v), s.first(v), s.second(v)):
    print(f"v = {vi:+.3f}   |v|_rho = {a:.5f}   d1 = {d1:+.4f}   d2 = {d2:7.3f}")

# %%
# Every structural property is available as a slack (positive means violated).
rng = np.random.default_rng(0)
samples = 0.1 * rng.uniform(-3, 3, 100_000)
for name, slack in assumption_slacks(s, samples).items():
    print(f"{name:15s} worst slack {slack:.2e}")
