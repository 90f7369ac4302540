"""Command-line front end: ``ripvisc <command> [--config PATH] [--out DIR] [--rho X] [--quiet]``.

Exit codes: 0 success, 2 bad configuration or input, 3 solver failure,
4 a numerical check did not pass (grad-check, verify-kkt).
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .adjoint import adjoint_bound_terms, evaluate, grad_check
from .discretization import bochner_norms
from .io import load_bundle, save_bundle, write_trajectory
from .optimizer import LineSearchStall, continuation_solve
from .scenario import ConfigError, load_scenario
from .state import (CompatibilityViolation, NewtonDivergence, PdasCycle,
                    solve_rate_independent, solve_regularized)
from .verifier import SignThresholds, check_complementarity, rate_study, verify_kkt

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4
GRAD_CHECK_TOL = 1e-5
VERY_WEAK_TOL = 1e-8
STATIONARITY_MATCH = 1e-10
THREADS_ENV = "RIPVISC_THREADS"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


class Run:
    """Output directory, enabled formats and console verbosity of one command."""

    def __init__(self, out_dir, formats, quiet):
        self.out_dir = out_dir
        self.formats = formats
        self.quiet = quiet
        os.makedirs(out_dir, exist_ok=True)

    def say(self, msg):
        if not self.quiet:
            print(msg)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def csv(self, name, columns, rows):
        if "csv" in self.formats:
            write_csv(self.path(name), columns, rows)

    def json(self, name, payload):
        if "json" in self.formats:
            write_json(self.path(name), payload)

    def traj(self, name, traj, tg, grid):
        if "traj" in self.formats:
            write_trajectory(self.path(f"{name}.traj"), traj, tg, grid, name)


def _norm_row(name, tg, grid, traj):
    nb = bochner_norms(tg, grid, traj)
    return {"field": name, "l2_h10": nb.l2_h10, "linf_h10": nb.linf_h10,
            "h1_l2": nb.h1_l2, "w11_hm1": nb.w11_hm1}


NORM_COLUMNS = ["field", "l2_h10", "linf_h10", "h1_l2", "w11_hm1"]


def cmd_solve_state(sc, run, args):
    tg, grid = sc.tg, sc.grid
    if args.reference:
        st = solve_rate_independent(sc.reference_problem(), sc.g_state)
        run.traj("z", st.z, tg, grid)
        run.traj("lam", st.lam, tg, grid)
        info = {"solver": "reference", "pdas_iterations": st.pdas_iterations,
                "max_abs_driving_force": float(np.max(np.abs(st.lam)))}
    else:
        st = solve_regularized(sc.problem(), sc.g_state)
        run.traj("z", st.z, tg, grid)
        run.traj("rates", st.rates, tg, grid)
        info = {"solver": "regularized", "rho": sc.rho, "newton_iterations": st.newton_iterations}
    rows = [_norm_row("z", tg, grid, st.z), _norm_row("g", tg, grid, sc.g_state)]
    run.csv("norms.csv", NORM_COLUMNS, rows)
    run.json("report.json", {"command": "solve-state", **info, "norms": rows})
    run.say(f"{info['solver']} state: ||z||_Linf(H1_0) = {rows[0]['linf_h10']:.6e}, "
            f"||z||_L2(H1_0) = {rows[0]['l2_h10']:.6e}")
    return EXIT_OK


def cmd_solve_adjoint(sc, run, args):
    tg, grid = sc.tg, sc.grid
    prob = sc.problem()
    ev = evaluate(prob, sc.spec, sc.g_initial, sc.g_anchor, sc.prox_weight)
    for name, arr in (("z", ev.state.z), ("q", ev.adjoint.q), ("xi", ev.adjoint.xi),
                      ("gradient", ev.gradient)):
        run.traj(name, arr, tg, grid)
    bounds = adjoint_bound_terms(prob, sc.spec, ev.state, ev.adjoint)
    rows = [_norm_row(n, tg, grid, a) for n, a in
            (("q", ev.adjoint.q), ("xi", ev.adjoint.xi), ("gradient", ev.gradient))]
    run.csv("norms.csv", NORM_COLUMNS, rows)
    run.json("report.json", {"command": "solve-adjoint", "rho": sc.rho, "objective": ev.objective,
                             "gradient_norm": ev.gradient_norm, "adjoint_bound_terms": bounds,
                             "norms": rows})
    run.say(f"objective {ev.objective:.10e}, gradient norm {ev.gradient_norm:.6e}")
    return EXIT_OK


def cmd_grad_check(sc, run, args):
    tg, grid = sc.tg, sc.grid
    eps_list = args.eps if args.eps else sc.eps_list
    rng = np.random.default_rng(sc.seed)
    h = rng.standard_normal((tg.n_steps + 1, grid.n_interior))
    h[0] = 0.0
    rows = grad_check(sc.problem(), sc.spec, sc.g_check, h, eps_list, sc.g_anchor, sc.prox_weight)
    table = [{"eps": r.eps, "finite_difference": r.finite_difference, "adjoint": r.adjoint,
              "abs_error": r.abs_error, "rel_error": r.rel_error,
              "flag": "" if r.rel_error <= GRAD_CHECK_TOL else "above_tolerance"} for r in rows]
    best = min(r.rel_error for r in rows)
    run.csv("grad_check.csv", ["eps", "finite_difference", "adjoint", "abs_error", "rel_error", "flag"],
            table)
    run.json("report.json", {"command": "grad-check", "rho": sc.rho, "seed": sc.seed,
                             "rows": table, "best_rel_error": best, "tolerance": GRAD_CHECK_TOL,
                             "passed": best <= GRAD_CHECK_TOL})
    run.say(f"{'eps':>10} {'fd':>22} {'adjoint':>22} {'rel err':>10}")
    for r in table:
        run.say(f"{r['eps']:10.1e} {r['finite_difference']:22.14e} {r['adjoint']:22.14e} "
                f"{r['rel_error']:10.2e} {r['flag']}")
    return EXIT_OK if best <= GRAD_CHECK_TOL else EXIT_CHECK


LEVEL_COLUMNS = ["rho", "iterations", "objective", "gradient_norm", "anchor_distance",
                 "converged", "drift", "delta_violated", "complementarity"]


def cmd_optimize(sc, run, args):
    tg, grid = sc.tg, sc.grid
    prox = sc.prox_weight
    anchor = sc.g_anchor if prox > 0 else None

    def log(rec):
        run.say(f"rho {rec.rho:9.3e}: {rec.iterations:5d} it, J = {rec.objective:.10e}, "
                f"|grad| = {rec.gradient_norm:.3e}" + ("" if rec.converged else "  (not converged)"))

    rep = continuation_solve(sc.problem(), sc.spec, sc.schedule, anchor, prox,
                             g_start=sc.g_initial, keep_levels=True, log=log)
    rows = rep.summary()
    for row, b in zip(rows, rep.bundles):
        row["complementarity"] = check_complementarity(tg, grid, b.z, b.q)
    run.csv("levels.csv", LEVEL_COLUMNS, rows)
    final = rep.bundles[-1]
    if "traj" in run.formats:
        save_bundle(final, run.path("bundle"))
    run.json("report.json", {"command": "optimize", "levels": rows,
                             "final_gradient_norm": rep.levels[-1].gradient_norm,
                             "inner_tol": sc.schedule.inner_tol,
                             "converged": all(r.converged for r in rep.levels)})
    return EXIT_OK


def _worker_count(n_jobs):
    raw = os.environ.get(THREADS_ENV)
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if cap < 1:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return max(1, min(cap, n_jobs))


def cmd_rate_study(sc, run, args):
    res = rate_study(sc.g_state, sc.tg, sc.grid, sc.rate_rhos, sc.refine, sc.newton_tol,
                     workers=_worker_count(len(sc.rate_rhos)))
    run.csv("rate_study.csv", ["rho", "error", "order"], res.rows)
    run.json("report.json", {"command": "rate-study", "rows": res.rows, "orders": res.order,
                             "z_h1_h10": res.z_h1_h10, "constant": res.constant,
                             "refine": sc.refine})
    for r in res.rows:
        order = "" if r["order"] is None else f"{r['order']:.3f}"
        run.say(f"rho {r['rho']:9.3e}  error {r['error']:.6e}  order {order}")
    return EXIT_OK


def _bundle_from_scenario(sc):
    prox = sc.prox_weight
    anchor = sc.g_anchor if prox > 0 else None
    rep = continuation_solve(sc.problem(), sc.spec, sc.schedule, anchor, prox,
                             g_start=sc.g_initial, keep_levels=True)
    return rep.bundles[-1]


def cmd_verify_kkt(sc, run, args):
    if args.bundle:
        try:
            bundle = load_bundle(args.bundle)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot load bundle {args.bundle}: {exc}") from None
    else:
        bundle = _bundle_from_scenario(sc)
    rep = verify_kkt(bundle, sc.n_time, sc.n_space, SignThresholds(gap_eps=sc.gap_eps))
    problems = [name for name, c in rep.estimate_checks.items() if not c.passed]
    if not rep.very_weak_adjoint <= VERY_WEAK_TOL:
        problems.append("very_weak_adjoint")
    if rep.gradient_norm is not None and not abs(rep.stationarity - rep.gradient_norm) <= (
            STATIONARITY_MATCH + 1e-8 * rep.gradient_norm):
        problems.append("stationarity_mismatch")
    residuals = {"complementarity_q": rep.complementarity_q, "stationarity": rep.stationarity,
                 "very_weak_adjoint": rep.very_weak_adjoint,
                 "multiplier_surrogate": rep.multiplier_surrogate,
                 "gradient_norm": rep.gradient_norm}
    run.csv("residuals.csv", ["name", "value"],
            [{"name": k, "value": v} for k, v in residuals.items()])
    run.csv("estimates.csv", ["name", "lhs", "rhs", "margin", "passed"],
            [{"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "margin": c.margin, "passed": c.passed}
             for c in rep.estimate_checks.values()])
    run.json("report.json", {"command": "verify-kkt", "rho": bundle.rho, **rep.to_dict(),
                             "failed": problems})
    for k, v in residuals.items():
        run.say(f"{k:22s} {_fmt(v)}")
    for c in rep.estimate_checks.values():
        run.say(f"{c.name:22s} margin {c.margin:+.4f}  {'ok' if c.passed else 'FAIL'}")
    return EXIT_CHECK if problems else EXIT_OK


COMMANDS = {
    "solve-state": cmd_solve_state,
    "solve-adjoint": cmd_solve_adjoint,
    "grad-check": cmd_grad_check,
    "optimize": cmd_optimize,
    "rate-study": cmd_rate_study,
    "verify-kkt": cmd_verify_kkt,
}


def _eps_list(text):
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("eps values must be positive")
    return vals


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario file (defaults apply if omitted)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.directory)")
    common.add_argument("--rho", type=float, metavar="X",
                        help="smoothing parameter; for optimize a single level at X")
    common.add_argument("--quiet", action="store_true", help="no console output")
    parser = argparse.ArgumentParser(prog="ripvisc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve-state", parents=[common], help="forward solve")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--regularized", action="store_true", help="viscous solver (default)")
    mode.add_argument("--reference", action="store_true", help="rate-independent solver")
    sub.add_parser("solve-adjoint", parents=[common], help="state, adjoint and gradient at control.initial")
    p = sub.add_parser("grad-check", parents=[common], help="adjoint gradient vs central differences")
    p.add_argument("--eps", type=_eps_list, metavar="LIST", help="comma-separated step sizes")
    sub.add_parser("optimize", parents=[common], help="continuation in rho with gradient descent")
    sub.add_parser("rate-study", parents=[common], help="regularization error vs rho")
    p = sub.add_parser("verify-kkt", parents=[common], help="audit an optimality system")
    p.add_argument("--bundle", metavar="DIR", help="bundle directory written by optimize")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        sc = load_scenario(args.config, args.rho)
        run = Run(args.out or sc.out_dir, sc.formats, args.quiet)
        return COMMANDS[args.command](sc, run, args)
    except (ConfigError, CompatibilityViolation) as exc:
        print(f"ripvisc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NewtonDivergence, PdasCycle, LineSearchStall, np.linalg.LinAlgError) as exc:
        print(f"ripvisc: solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
