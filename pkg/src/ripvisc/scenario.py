"""Scenario files: flat ``key = value`` text with dotted keys.

Grammar::

    # comment to end of line
    section.key = value

Values are numbers, comma-separated number lists, words, or field
expressions.  A field expression is a sum of products built from numbers and
the families below, e.g. ``ramp(2) * sine(1, 1)`` or
``ramp(3) * bump(0.4, 0.2, 1) + 0.1 * hat(0.5, 1) * const(1)``.

time factors
    ``ramp(slope)`` = slope * t,  ``cycle(period, amp)`` = amp * sin(2 pi t / period),
    ``hat(t_peak, amp)`` = amp * max(0, 1 - |t - t_peak| / t_peak)
space factors
    ``bump(center, width, amp)`` = amp * exp(-((x - center) / width)^2),
    ``sine(m, amp)`` = amp * sin(m pi x / L),  ``const(a)`` = a
special values
    ``zero``; ``file:<path>`` reads a trajectory file (z_T takes its last row);
    ``manufactured`` (targets and anchor only) uses the reference state of
    ``objective.manufactured`` and that control itself.

``state.g`` (default: ``control.initial``) drives solve-state and rate-study;
``grad_check.g`` (same default) is the control at which grad-check compares
derivatives.
"""

import ast
import os
from dataclasses import dataclass, field

import numpy as np

from .adjoint import ObjectiveSpec
from .discretization import SpatialGrid, TimeGrid
from .io import read_trajectory
from .optimizer import ContinuationSchedule
from .smoothed_abs import SmoothedAbs
from .state import RegStateProblem, RISolveProblem, solve_rate_independent


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "domain.L": "1.0",
    "domain.n_interior": "49",
    "time.T": "1.0",
    "time.n_steps": "100",
    "smoothing.rho": "",
    "smoothing.rho_init": "0.1",
    "smoothing.factor": "0.1",
    "smoothing.n_levels": "4",
    "objective.alpha": "1.0",
    "objective.beta": "1.0",
    "objective.z_d": "zero",
    "objective.z_T": "zero",
    "objective.manufactured": "",
    "control.initial": "zero",
    "control.anchor": "zero",
    "control.prox_weight": "0.0",
    "solver.newton_tol": "1e-10",
    "solver.newton_max_iter": "500",
    "solver.pdas_c": "1.0",
    "solver.inner_tol": "1e-6",
    "solver.inner_max_iter": "500",
    "solver.delta": "inf",
    "output.directory": "out",
    "output.formats": "csv,json,traj",
    "state.g": "",
    "rate_study.rhos": "1e-1,3e-2,1e-2,3e-3,1e-3",
    "rate_study.refine": "2",
    "grad_check.eps": "1e-2,1e-3,1e-4,1e-5",
    "grad_check.seed": "0",
    "grad_check.g": "",
    "verify.n_time": "5",
    "verify.n_space": "5",
    "verify.gap_eps": "1e-3",
}

KNOWN_FORMATS = {"csv", "json", "traj"}


def parse_text(text, source="<config>"):
    """Return the raw ``{dotted_key: value}`` mapping of a scenario text."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


# ---------------------------------------------------------------- field expressions

def _time_ramp(t, T, slope):
    return slope * t


def _time_cycle(t, T, period, amp):
    return amp * np.sin(2.0 * np.pi * t / period)


def _time_hat(t, T, t_peak, amp):
    return amp * np.maximum(0.0, 1.0 - np.abs(t - t_peak) / t_peak)


def _space_bump(x, L, center, width, amp):
    return amp * np.exp(-(((x - center) / width) ** 2))


def _space_sine(x, L, m, amp):
    return amp * np.sin(m * np.pi * x / L)


def _space_const(x, L, a):
    return a + 0.0 * x


TIME_FAMILIES = {"ramp": (_time_ramp, 1), "cycle": (_time_cycle, 2), "hat": (_time_hat, 2)}
SPACE_FAMILIES = {"bump": (_space_bump, 3), "sine": (_space_sine, 2), "const": (_space_const, 1)}


def _eval_node(node, t, x, T, L):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, t, x, T, L)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, t, x, T, L)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult)):
        a = _eval_node(node.left, t, x, T, L)
        b = _eval_node(node.right, t, x, T, L)
        if isinstance(node.op, ast.Add):
            return a + b
        return a - b if isinstance(node.op, ast.Sub) else a * b
    if isinstance(node, ast.Name) and node.id == "zero":
        return 0.0
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        args = [_eval_node(a, t, x, T, L) for a in node.args]
        if node.keywords or not all(isinstance(a, float) for a in args):
            raise ConfigError(f"{name}(...) takes plain numeric arguments")
        table = TIME_FAMILIES if name in TIME_FAMILIES else SPACE_FAMILIES
        if name not in table:
            raise ConfigError(f"unknown family {name!r}")
        fn, arity = table[name]
        if len(args) != arity:
            raise ConfigError(f"{name} expects {arity} arguments, got {len(args)}")
        if table is TIME_FAMILIES:
            return fn(t, T, *args)
        return fn(x, L, *args)
    raise ConfigError(f"unsupported expression element: {ast.dump(node)[:60]}")


def evaluate_expression(expr, tg, grid):
    """Evaluate a field expression on the ``(N + 1, n)`` space-time grid."""
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse field expression {expr!r}: {exc.msg}") from None
    t = tg.t[:, None]
    x = grid.x[None, :]
    try:
        val = _eval_node(tree, t, x, tg.T, grid.L)
    except ZeroDivisionError:
        raise ConfigError(f"division by zero in {expr!r}") from None
    return np.broadcast_to(np.asarray(val, dtype=float), (t.size, x.size)).copy()


def _load_file(path, tg, grid, base_dir):
    path = path if os.path.isabs(path) else os.path.join(base_dir, path)
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}")
    try:
        traj, ftg, fgrid, _ = read_trajectory(path)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if fgrid != grid:
        raise ConfigError(f"{path}: spatial grid does not match the scenario")
    if ftg != tg:
        raise ConfigError(f"{path}: time grid does not match the scenario")
    return traj


# ---------------------------------------------------------------- typed scenario

def _float(raw, key, positive=False, nonneg=False):
    try:
        v = float(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw[key]!r}") from None
    if np.isnan(v) or (positive and not v > 0) or (nonneg and v < 0):
        raise ConfigError(f"{key}: value {v!r} out of range")
    return v


def _int(raw, key, minimum=1):
    try:
        v = int(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw[key]!r}") from None
    if v < minimum:
        raise ConfigError(f"{key}: must be at least {minimum}")
    return v


def _float_list(raw, key):
    try:
        vals = [float(s) for s in raw[key].split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers") from None
    if not vals:
        raise ConfigError(f"{key}: empty list")
    return vals


@dataclass
class Scenario:
    """Typed view of a scenario file with all fields resolved on the grids."""

    raw: dict
    grid: SpatialGrid
    tg: TimeGrid
    rho: float
    schedule: ContinuationSchedule
    spec: ObjectiveSpec
    g_initial: np.ndarray
    g_anchor: np.ndarray
    prox_weight: float
    newton_tol: float
    newton_max_iter: int
    pdas_c: float
    out_dir: str
    formats: set
    g_state: np.ndarray
    rate_rhos: list
    refine: int
    eps_list: list
    seed: int
    g_check: np.ndarray
    n_time: int
    n_space: int
    gap_eps: float
    manufactured: np.ndarray = field(default=None, repr=False)

    def problem(self, rho=None):
        return RegStateProblem(self.grid, self.tg, SmoothedAbs(self.rho if rho is None else rho),
                               self.newton_tol, self.newton_max_iter)

    def reference_problem(self):
        return RISolveProblem(self.grid, self.tg, self.pdas_c)


def build_scenario(raw, base_dir=".", rho_override=None):
    vals = dict(DEFAULTS)
    vals.update(raw)
    try:
        grid = SpatialGrid(_int(vals, "domain.n_interior"), _float(vals, "domain.L", positive=True))
        tg = TimeGrid(_int(vals, "time.n_steps"), _float(vals, "time.T", positive=True))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"grid: {exc}") from None

    try:
        schedule = ContinuationSchedule(
            rho_init=_float(vals, "smoothing.rho_init", positive=True),
            factor=_float(vals, "smoothing.factor", positive=True),
            n_levels=_int(vals, "smoothing.n_levels"),
            inner_tol=_float(vals, "solver.inner_tol", positive=True),
            inner_max_iter=_int(vals, "solver.inner_max_iter"),
            delta=_float(vals, "solver.delta", positive=True))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"smoothing schedule: {exc}") from None
    if rho_override is not None:
        if not rho_override > 0:
            raise ConfigError("--rho must be positive")
        rho = float(rho_override)
        schedule.rho_init, schedule.n_levels = rho, 1
    elif vals["smoothing.rho"]:
        rho = _float(vals, "smoothing.rho", positive=True)
    else:
        rho = schedule.levels()[-1]

    def resolve(key, allow_manufactured=False):
        expr = vals[key].strip()
        if not expr:
            raise ConfigError(f"{key}: empty value")
        if expr == "manufactured":
            if not allow_manufactured or manufactured is None:
                raise ConfigError(f"{key}: 'manufactured' needs objective.manufactured")
            return None
        if expr.startswith("file:"):
            return _load_file(expr[5:].strip(), tg, grid, base_dir)
        return evaluate_expression(expr, tg, grid)

    manufactured = None
    if vals["objective.manufactured"]:
        manufactured = evaluate_expression(vals["objective.manufactured"], tg, grid)

    g_init = resolve("control.initial")
    anchor = resolve("control.anchor", allow_manufactured=True)
    z_d = resolve("objective.z_d", allow_manufactured=True)
    z_T = resolve("objective.z_T", allow_manufactured=True)
    pdas_c = _float(vals, "solver.pdas_c", positive=True)
    if manufactured is not None and (z_d is None or z_T is None):
        if np.any(np.abs(manufactured[0]) > 1.0):
            raise ConfigError("objective.manufactured violates |g(0)| <= 1")
        z_star = solve_rate_independent(RISolveProblem(grid, tg, pdas_c), manufactured).z
        z_d = z_star if z_d is None else z_d
        z_T = z_star[-1] if z_T is None else z_T[-1]
    else:
        z_T = z_T[-1]
    if anchor is None:
        anchor = manufactured
    for name, g in (("control.initial", g_init), ("control.anchor", anchor)):
        if np.any(g[0] != 0.0):
            raise ConfigError(f"{name} must vanish at t = 0")

    formats = {s.strip() for s in vals["output.formats"].split(",") if s.strip()}
    if not formats <= KNOWN_FORMATS:
        raise ConfigError(f"output.formats: unknown {sorted(formats - KNOWN_FORMATS)}")
    rhos = _float_list(vals, "rate_study.rhos")
    if any(r <= 0 for r in rhos) or any(a <= b for a, b in zip(rhos, rhos[1:])):
        raise ConfigError("rate_study.rhos must be positive and strictly decreasing")
    eps_list = _float_list(vals, "grad_check.eps")
    if any(e <= 0 for e in eps_list):
        raise ConfigError("grad_check.eps must be positive")

    try:
        spec = ObjectiveSpec(_float(vals, "objective.alpha", nonneg=True),
                             _float(vals, "objective.beta", nonneg=True), z_d, z_T)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    return Scenario(
        raw=vals, grid=grid, tg=tg, rho=rho, schedule=schedule, spec=spec,
        g_initial=g_init, g_anchor=anchor,
        prox_weight=_float(vals, "control.prox_weight", nonneg=True),
        newton_tol=_float(vals, "solver.newton_tol", positive=True),
        newton_max_iter=_int(vals, "solver.newton_max_iter"),
        pdas_c=pdas_c,
        out_dir=vals["output.directory"], formats=formats,
        g_state=resolve("state.g") if vals["state.g"] else g_init,
        rate_rhos=rhos, refine=_int(vals, "rate_study.refine"),
        eps_list=eps_list, seed=_int(vals, "grad_check.seed", minimum=0),
        g_check=resolve("grad_check.g") if vals["grad_check.g"] else g_init,
        n_time=_int(vals, "verify.n_time"), n_space=_int(vals, "verify.n_space"),
        gap_eps=_float(vals, "verify.gap_eps", positive=True),
        manufactured=manufactured)


def load_scenario(path=None, rho_override=None):
    """Parse and resolve a scenario file; ``None`` gives the all-default scenario."""
    if path is None:
        return build_scenario({}, rho_override=rho_override)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    base = os.path.dirname(os.path.abspath(path))
    return build_scenario(parse_text(text, path), base, rho_override)
