"""Quadratic-spline smoothing of the modulus and its first two derivatives.

The second derivative is the hat ``2/rho**2 * max(rho - |v|, 0)``; the first
derivative and the value are its closed-form antiderivatives, normalised so
that ``|v|_rho = |v|`` for ``|v| >= rho``.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SmoothedAbs:
    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")

    def second(self, v):
        v = np.asarray(v, dtype=float)
        return 2.0 / self.rho**2 * np.maximum(self.rho - np.abs(v), 0.0)

    def first(self, v):
        v = np.asarray(v, dtype=float)
        a = np.minimum(np.abs(v), self.rho) / self.rho
        return np.sign(v) * a * (2.0 - a)

    def value(self, v):
        v = np.asarray(v, dtype=float)
        r = self.rho
        a = np.abs(v)
        inner = r / 3.0 + a**2 / r - a**3 / (3.0 * r**2)
        return np.where(a >= r, a, inner)


def assumption_slacks(sabs, v):
    """Worst-case slack of each smoothing property over samples ``v``.

    Every entry is ``<= 0`` when the property holds (up to rounding); the
    returned values are the maximum violations.
    """
    v = np.asarray(v, dtype=float)
    r = sabs.rho
    a = np.abs(v)
    val, d1, d2 = sabs.value(v), sabs.first(v), sabs.second(v)
    outside = a >= r
    return {
        "exact_outside": float(np.max(np.abs(val - a)[outside], initial=0.0)),
        "second_upper": float(np.max(d2 - 2.0 / r)),
        "second_nonneg": float(np.max(-d2)),
        "even_value": float(np.max(np.abs(sabs.value(-v) - val))),
        "odd_first": float(np.max(np.abs(sabs.first(-v) + d1))),
        "first_range": float(np.max(np.abs(d1) - 1.0)),
        "lower_bound": float(np.max(a - val)),
        "upper_bound": float(np.max(val - a - r)),
        "first_times_v": float(np.max(a - r - d1 * v)),
    }
