"""Optimal control of a one-dimensional rate-independent evolution via vanishing viscosity.

Submodules: ``discretization`` (grids, norms), ``smoothed_abs``, ``state``
(forward solvers), ``adjoint`` (objective and reduced gradient),
``optimizer`` (descent and continuation), ``verifier`` (audits), ``io`` and
``scenario`` (files), ``cli``.
"""

from .adjoint import ObjectiveSpec, evaluate, grad_check, reduced_gradient, solve_adjoint
from .discretization import SpatialGrid, TimeGrid, bochner_norms, h1_inner, h1_norm
from .io import SolveBundle, load_bundle, read_trajectory, save_bundle, write_trajectory
from .optimizer import ContinuationSchedule, continuation_solve, minimize_at_rho
from .smoothed_abs import SmoothedAbs
from .state import (RegStateProblem, RISolveProblem, scalar_play, solve_linearized,
                    solve_rate_independent, solve_regularized, t_rho_solve)
from .verifier import check_complementarity, check_estimates, rate_study, verify_kkt

__all__ = [
    "ObjectiveSpec", "evaluate", "grad_check", "reduced_gradient", "solve_adjoint",
    "SpatialGrid", "TimeGrid", "bochner_norms", "h1_inner", "h1_norm",
    "SolveBundle", "load_bundle", "read_trajectory", "save_bundle", "write_trajectory",
    "ContinuationSchedule", "continuation_solve", "minimize_at_rho",
    "SmoothedAbs",
    "RegStateProblem", "RISolveProblem", "scalar_play", "solve_linearized",
    "solve_rate_independent", "solve_regularized", "t_rho_solve",
    "check_complementarity", "check_estimates", "rate_study", "verify_kkt",
]
