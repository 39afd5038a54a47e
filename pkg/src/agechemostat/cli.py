"""Command-line front end.

Exit status: 0 on success, 1 when the mathematics refuses the input
(washout, infeasible certificate, violated assumption), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .certificate import (Certificate, check_conditions, feasibility_threshold_scan, search_certificate,
                          tothkot_recipe)
from .equilibrium import solve_equilibrium
from .errors import ConfigError, DomainError
from .lyapunov import TABLE_COLUMNS, LyapunovMonitor, LyapunovWeights
from .model import (AssumptionBData, Linear, Monod, ModelParams, age_function_from_dict, tothkot_assumption_b,
                    tothkot_parameters, verify_assumption_B)
from .pipeline import REPORT_N_AGE, tothkot_report
from .simulator import State, check_pathwise_bounds, initial_state, simulate

logger = logging.getLogger("agechemostat")

TRAJECTORY_COLUMNS = ("t", "S", "mass", "kf", "qf", "x")
SNAPSHOT_NAME = "snap_{:08d}.csv"
_SNAPSHOT_RE = re.compile(r"snap_(\d+)\.csv$")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _positive(kind=float):
    def parse(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return value
    return parse


def _non_negative(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return value


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------


def load_model(path, dt: float | None = None) -> ModelParams:
    params = ModelParams.from_dict(io.read_json(path, "model"))
    if dt is not None:
        params = params.regrid(da=dt)
    return params


def load_assumption_b(path, params: ModelParams) -> AssumptionBData:
    if path is not None:
        return AssumptionBData.from_dict(io.read_json(path, "assumption-B"))
    try:
        return tothkot_assumption_b(params)
    except ValueError:
        raise ConfigError("assumption-B file required for models outside the constant-mortality family")


def load_initial(path, params: ModelParams, eq):
    doc = io.read_json(path, "initial condition")
    unknown = set(doc) - {"S0", "profile"}
    if unknown or "S0" not in doc or "profile" not in doc:
        raise ConfigError("initial condition needs exactly the keys S0 and profile")
    prof = doc["profile"]
    if not isinstance(prof, dict):
        raise ConfigError("initial condition profile must be an object")
    if prof.get("family") == "equilibrium":
        if set(prof) - {"family", "scale"}:
            raise ConfigError("equilibrium profile accepts only 'scale'")
        values = float(prof.get("scale", 1.0)) * eq.f_star0 * eq.r
    else:
        values = age_function_from_dict(prof, "profile")
    try:
        S0 = float(doc["S0"])
        return initial_state(params, values, S0)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"initial condition: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_equilibrium(args) -> int:
    params = load_model(args.model)
    eq = solve_equilibrium(params)
    sys.stdout.write(io.dumps_report(eq.to_dict()))
    return 0


def cmd_simulate(args) -> int:
    params = load_model(args.model, args.dt)
    eq = solve_equilibrium(params)
    init = load_initial(args.initial, params, eq)
    data = load_assumption_b(args.assumption_b, params) if (args.assert_bounds or args.assumption_b) else None
    keep = bool(args.snapshots)
    traj = simulate(init, params, eq, args.horizon, args.stride, keep_profiles=keep,
                    fd_neighbors=keep and args.fd_neighbors)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv_file(out / "trajectory.csv", TRAJECTORY_COLUMNS,
                      [traj.t, traj.S, traj.mass, traj.kf, traj.qf, traj.x])
    if keep:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        a = params.ages
        steps = sorted(set(int(s) for s in traj.snapshot_steps) | set(traj.neighbors))
        for n in steps:
            io.write_csv_file(snap_dir / SNAPSHOT_NAME.format(n), ("a", "f"), [a, traj.state_at_step(n).f])
    run_doc = {"model": params.to_dict(), "dt": traj.dt, "stride": traj.stride, "horizon": args.horizon,
               "steps": traj.n_steps}
    if args.assert_bounds:
        report = check_pathwise_bounds(traj, data=data)
        run_doc["bounds"] = {"tol": report.tol, "margins": report.margins, "ok": report.ok}
        io.write_report(run_doc, out / "run.json")
        if not report.ok:
            raise DomainError("pathwise bound violated: " + ", ".join(report.failures))
    else:
        io.write_report(run_doc, out / "run.json")
    return 0


def _load_snapshots(directory: Path, params: ModelParams) -> dict[int, np.ndarray]:
    snaps = {}
    if not directory.is_dir():
        raise ConfigError(f"snapshot directory not found: {directory}")
    for path in sorted(directory.iterdir()):
        m = _SNAPSHOT_RE.search(path.name)
        if m:
            cols = io.read_csv(path)
            if cols["f"].size != params.n_age:
                raise ConfigError(f"{path.name}: {cols['f'].size} ages, model grid has {params.n_age}")
            snaps[int(m.group(1))] = cols["f"]
    if not snaps:
        raise ConfigError(f"no snapshots in {directory}")
    return snaps


def cmd_lyapunov(args) -> int:
    traj_path = Path(args.trajectory)
    traj = io.read_csv(traj_path)
    if "t" not in traj or "S" not in traj:
        raise ConfigError("trajectory CSV needs columns t and S")
    dt = float(traj["t"][1] - traj["t"][0]) if traj["t"].size > 1 else 1.0
    params = load_model(args.model)
    if traj["t"].size > 1 and abs(dt - params.da) > 1e-9 * params.da:
        params = params.regrid(da=dt)
    eq = solve_equilibrium(params)
    cert_eval = None
    data = load_assumption_b(args.assumption_b, params) if (args.assumption_b or _is_tothkot(params)) else None
    if args.certificate:
        doc = io.read_json(args.certificate, "certificate")
        # accept the report written by `certify` as well as a bare constant set
        doc = doc.get("constants", doc)
        try:
            cert = Certificate.from_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{args.certificate}: {exc}") from exc
        weights = cert.weights
        if data is None:
            raise ConfigError("a certificate needs assumption-B data")
        cert_eval = check_conditions(eq, data, cert).evaluation
    elif args.weights:
        try:
            weights = LyapunovWeights.from_dict(io.read_json(args.weights, "weights"))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"weights: {exc}") from exc
    else:
        raise ConfigError("give --weights or --certificate")
    snap_dir = Path(args.snapshots) if args.snapshots else traj_path.parent / "snapshots"
    snaps = _load_snapshots(snap_dir, params)
    mon = LyapunovMonitor(eq, weights, data, cert_eval)
    for n, f in sorted(snaps.items()):
        if n >= traj["S"].size:
            raise ConfigError(f"snapshot step {n} beyond the trajectory")
        mon(n, State(f, traj["S"][n], traj["t"][n]))
    run_file = traj_path.parent / "run.json"
    stride = int(io.read_json(run_file, "run").get("stride", 1)) if run_file.is_file() else 1
    # steps off the stride were written only to support central differences
    primary = [n for n in sorted(snaps) if n % stride == 0]
    table = mon.table(primary, dt)
    columns = [c for c in TABLE_COLUMNS if c not in ("slack_scaled", "in_omega")]
    out = sys.stdout if args.out is None else open(args.out, "w", newline="")
    try:
        io.write_csv(out, columns, [table[c] for c in columns])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _is_tothkot(params: ModelParams) -> bool:
    try:
        tothkot_parameters(params)
        return True
    except ValueError:
        return False


def cmd_certify(args) -> int:
    params = load_model(args.model)
    eq = solve_equilibrium(params)
    data = load_assumption_b(args.assumption_b, params)
    resid = verify_assumption_B(params, data, theta=data.theta if data.theta is not None else eq.theta)
    if not resid.ok:
        raise DomainError(resid.message)
    if data.theta is None:
        data = data.with_theta(eq.theta)
    if args.recipe:
        D, L, k_tilde, Y = _tothkot_or_fail(params)
        res = tothkot_recipe(D, L, k_tilde, Y, eq, data, F_factor=args.F_factor)
        doc = {"method": "recipe", "feasible": res.feasible, "message": res.message,
               "Gamma1": res.Gamma1, "Gamma_max": res.Gamma_max}
        if res.report is not None:
            doc.update(res.report.to_dict())
        sys.stdout.write(io.dumps_report(doc))
        if not res.feasible:
            raise DomainError(res.message)
        return 0
    res = search_certificate(eq, data, args.budget, args.seed)
    doc = {"method": "search", "found": res.found, "label": res.label, "evaluations": res.evaluations,
           "score": res.score}
    if res.report is not None:
        doc.update(res.report.to_dict())
    sys.stdout.write(io.dumps_report(doc))
    if not res.found:
        raise DomainError("certificate not found within budget (non-conclusive)")
    return 0


def _tothkot_or_fail(params):
    try:
        return tothkot_parameters(params)
    except ValueError as exc:
        raise ConfigError(f"--recipe: {exc}") from exc


def cmd_scan(args) -> int:
    if args.D_max <= args.D_min:
        raise ConfigError("--D-max must exceed --D-min")
    grid = np.linspace(args.D_min, args.D_max, args.points)
    rows = feasibility_threshold_scan(args.L, args.k_tilde, args.Y, grid, S_in=args.S_in, n_age=args.n_age)
    out = sys.stdout if args.out is None else open(args.out, "w", newline="")
    try:
        io.write_csv(out, ("D", "recipe_feasible", "cond_4_9", "cond_4_10"),
                     [[r.D for r in rows], [r.recipe_feasible for r in rows],
                      [r.cond_global for r in rows], [r.cond_linearization for r in rows]])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _growth_from_args(args):
    if args.mu == "linear":
        return Linear(args.mu_c)
    return Monod(args.mu_m, args.mu_a_half)


def cmd_tothkot(args) -> int:
    report = tothkot_report(args.Y, args.k_tilde, args.L, args.D, args.S_in, _growth_from_args(args),
                            n_age=args.n_age, da=args.dt, horizon=args.horizon,
                            run_decay=not args.no_decay)
    text = io.dumps_report(report.to_dict())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if not report.feasible:
        raise DomainError(f"certificate {report.message}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="agechemostat", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("equilibrium", help="solve for the interior equilibrium")
    s.add_argument("model")
    s.set_defaults(func=cmd_equilibrium)

    s = sub.add_parser("simulate", help="integrate from an initial condition")
    s.add_argument("model")
    s.add_argument("initial")
    s.add_argument("--horizon", type=_non_negative, required=True)
    s.add_argument("--dt", type=_positive(), default=None, help="time step = age step (regrids the model)")
    s.add_argument("--stride", type=_positive(int), default=1)
    s.add_argument("--snapshots", action="store_true", help="write profile snapshots")
    s.add_argument("--fd-neighbors", action="store_true", help="also write the steps adjacent to each snapshot")
    s.add_argument("--assert-bounds", action="store_true")
    s.add_argument("--assumption-b", default=None)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("lyapunov", help="evaluate the functional along a simulated trajectory")
    s.add_argument("trajectory", help="trajectory.csv written by simulate --snapshots")
    s.add_argument("--model", required=True)
    s.add_argument("--weights", default=None)
    s.add_argument("--certificate", default=None)
    s.add_argument("--assumption-b", default=None)
    s.add_argument("--snapshots", default=None, help="snapshot directory (default: next to the trajectory)")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_lyapunov)

    s = sub.add_parser("certify", help="check or search the sufficient stability conditions")
    s.add_argument("model")
    s.add_argument("--assumption-b", default=None)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--recipe", action="store_true")
    g.add_argument("--search", action="store_true")
    s.add_argument("--budget", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--F-factor", type=_positive(), default=2.0, help="F = factor * R * S_in for the recipe")
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("scan", help="recipe feasibility against the two dilution thresholds")
    s.add_argument("--L", type=_positive(), required=True)
    s.add_argument("--k-tilde", type=_non_negative, required=True)
    s.add_argument("--Y", type=_positive(), required=True)
    s.add_argument("--D-min", type=_positive(), required=True)
    s.add_argument("--D-max", type=_positive(), required=True)
    s.add_argument("--points", type=_positive(int), default=50)
    s.add_argument("--S-in", type=_positive(), default=2.0)
    s.add_argument("--n-age", type=_positive(int), default=4001)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("tothkot", help="full report for the constant-mortality model")
    s.add_argument("--Y", type=_positive(), required=True)
    s.add_argument("--k-tilde", type=_non_negative, required=True)
    s.add_argument("--L", type=_positive(), required=True)
    s.add_argument("--D", type=_positive(), required=True)
    s.add_argument("--S-in", type=_positive(), required=True)
    s.add_argument("--mu", choices=("linear", "monod"), default="linear")
    s.add_argument("--mu-c", type=_positive(), default=1.0)
    s.add_argument("--mu-m", type=_positive(), default=1.0)
    s.add_argument("--mu-a-half", type=_positive(), default=1.0)
    s.add_argument("--n-age", type=_positive(int), default=REPORT_N_AGE)
    s.add_argument("--dt", type=_positive(), default=None)
    s.add_argument("--horizon", type=_positive(), default=None)
    s.add_argument("--no-decay", action="store_true", help="skip the standard perturbed run")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_tothkot)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"agechemostat: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"agechemostat: error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"agechemostat: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
