"""Trajectory files and solve bundles.

A trajectory file is plain text: one header line

    # n_steps=<N> n_interior=<n> T=<T> L=<L> field=<name>

followed by ``N + 1`` rows of ``n`` space-separated numbers written with 17
significant digits, which reloads bit-identically.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .adjoint import ObjectiveSpec
from .discretization import SpatialGrid, TimeGrid
from .smoothed_abs import SmoothedAbs
from .state import RegStateProblem

FMT = "%.17g"


def write_trajectory(path, traj, tg, grid, name):
    traj = tg.check(traj, grid)
    header = (f"n_steps={tg.n_steps} n_interior={grid.n_interior} "
              f"T={tg.T!r} L={grid.L!r} field={name}")
    np.savetxt(path, traj, fmt=FMT, header=header, comments="# ")


def read_header(path):
    with open(path) as fh:
        line = fh.readline()
    if not line.startswith("#"):
        raise ValueError(f"{path}: missing trajectory header")
    meta = dict(item.split("=", 1) for item in line[1:].split())
    return {"n_steps": int(meta["n_steps"]), "n_interior": int(meta["n_interior"]),
            "T": float(meta["T"]), "L": float(meta["L"]), "field": meta.get("field", "")}


def read_trajectory(path):
    """Return ``(traj, tg, grid, name)``."""
    meta = read_header(path)
    data = np.loadtxt(path, comments="#", ndmin=2)
    tg = TimeGrid(meta["n_steps"], meta["T"])
    grid = SpatialGrid(meta["n_interior"], meta["L"])
    return tg.check(data, grid), tg, grid, meta["field"]


@dataclass
class SolveBundle:
    """Everything needed to audit one regularized solve."""

    grid: SpatialGrid
    tg: TimeGrid
    rho: float
    g: np.ndarray
    z: np.ndarray
    rates: np.ndarray
    q: np.ndarray = None
    xi: np.ndarray = None
    spec: ObjectiveSpec = None
    g_anchor: np.ndarray = None
    prox_weight: float = 0.0
    newton_tol: float = 1e-10
    gradient_norm: float = None

    def problem(self):
        return RegStateProblem(self.grid, self.tg, SmoothedAbs(self.rho), self.newton_tol)

    @classmethod
    def from_evaluation(cls, prob, spec, g, ev, g_anchor=None, prox_weight=0.0):
        adj = ev.adjoint
        return cls(prob.grid, prob.tg, prob.rho, np.array(g), ev.state.z, ev.state.rates,
                   None if adj is None else adj.q, None if adj is None else adj.xi,
                   spec, g_anchor, prox_weight, prob.newton_tol, ev.gradient_norm)


_TRAJ_FIELDS = ("g", "z", "rates", "q", "xi", "g_anchor")


def save_bundle(bundle, directory):
    os.makedirs(directory, exist_ok=True)
    tg, grid = bundle.tg, bundle.grid
    for name in _TRAJ_FIELDS:
        val = getattr(bundle, name)
        if val is not None:
            write_trajectory(os.path.join(directory, f"{name}.traj"), val, tg, grid, name)
    spec = bundle.spec
    if spec is not None:
        write_trajectory(os.path.join(directory, "z_d.traj"),
                         spec.distributed_target(tg, grid), tg, grid, "z_d")
        np.savetxt(os.path.join(directory, "z_T.field"),
                   spec.terminal_target(grid)[None, :], fmt=FMT)
    meta = {"rho": bundle.rho, "prox_weight": bundle.prox_weight,
            "newton_tol": bundle.newton_tol, "gradient_norm": bundle.gradient_norm,
            "alpha": None if spec is None else spec.alpha,
            "beta": None if spec is None else spec.beta,
            "n_steps": tg.n_steps, "T": tg.T, "n_interior": grid.n_interior, "L": grid.L}
    with open(os.path.join(directory, "bundle.json"), "w") as fh:
        json.dump(meta, fh, indent=2)


def load_bundle(directory):
    with open(os.path.join(directory, "bundle.json")) as fh:
        meta = json.load(fh)
    tg = TimeGrid(meta["n_steps"], meta["T"])
    grid = SpatialGrid(meta["n_interior"], meta["L"])
    fields = {}
    for name in _TRAJ_FIELDS + ("z_d",):
        path = os.path.join(directory, f"{name}.traj")
        fields[name] = read_trajectory(path)[0] if os.path.exists(path) else None
    spec = None
    if meta.get("alpha") is not None:
        z_T = np.loadtxt(os.path.join(directory, "z_T.field"), ndmin=2)[0]
        spec = ObjectiveSpec(meta["alpha"], meta["beta"], fields["z_d"], z_T)
    return SolveBundle(grid, tg, meta["rho"], fields["g"], fields["z"], fields["rates"],
                       fields["q"], fields["xi"], spec, fields["g_anchor"],
                       meta["prox_weight"], meta["newton_tol"], meta.get("gradient_norm"))
