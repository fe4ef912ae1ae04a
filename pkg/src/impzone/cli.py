"""Batch entry point: ``impzone {sets,simulate,check}``.

Exit codes: 0 success, 2 invalid config, 3 solver failure, 4 infeasible
problem or invalid target.  Failures print a JSON object with ``error``,
``type`` and ``exit_code`` to stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .admissible import SpectrahedronSet, grid_oracle, is_admissible, max_facet_excursion
from .config import ProblemConfig, example_config
from .errors import ConfigError, ImpzoneError, InfeasibleProblem, SolverFailure, SpectrumError
from .pipeline import compute_sets, make_controller
from .sim import check_violations, run_closed_loop

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INFEASIBLE = 0, 2, 3, 4

log = logging.getLogger("impzone")


class _Encoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        return super().default(o)


def dumps(obj):
    return json.dumps(obj, cls=_Encoder, indent=2, sort_keys=True)


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith("\n") else text + "\n")
    return str(path)


def _vector(text, n, name):
    try:
        x = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise ConfigError(f"{name}: expected {n} comma-separated numbers") from None
    if x.size != n:
        raise ConfigError(f"{name}: expected {n} components, got {x.size}")
    return x


def load_config(args):
    cfg = ProblemConfig.load(args.config) if args.config else example_config()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    return cfg


def cmd_sets(cfg, plots=True):
    out = Path(cfg.output_dir)
    sets = compute_sets(cfg)
    files = {
        "sets": _write(out / "sets.json", dumps(sets.to_dict())),
        "validity": _write(out / "validity.json", dumps(sets.report.to_dict())),
    }
    if plots and cfg.n == 2:
        from .plotting import plot_sets

        files["figure"] = str(plot_sets(sets, cfg.target, out / "sets.png"))
    summary = {
        "command": "sets",
        "valid": sets.report.valid,
        "ices_nonempty": sets.report.ices_nonempty,
        "iterations": sets.report.diagnostics.get("iterations"),
        "seed": cfg.seed,
        "files": files,
    }
    code = EXIT_OK if sets.report.valid is True else EXIT_INFEASIBLE
    return summary, code


def cmd_simulate(cfg, controller="tracking", x0=None, steps=10, plots=True):
    out = Path(cfg.output_dir)
    sets = compute_sets(cfg)
    x0 = sets.state_inner.vertices.mean(axis=0) if x0 is None else np.asarray(x0, dtype=float)
    ctrl = make_controller(cfg, sets, controller)
    meta = {"controller": controller, "x0": x0.tolist(), "steps": steps, "M": cfg.M, "seed": cfg.seed}
    code, error = EXIT_OK, None
    try:
        traj = run_closed_loop(sets.system, ctrl, x0, steps, cfg.M, meta)
    except InfeasibleProblem as exc:
        traj, code, error = exc.trajectory, EXIT_INFEASIBLE, str(exc)
    rep = check_violations(traj, cfg.state_set, cfg.target, md=sets.system.modal) if traj.steps else None
    in_inv = [bool(sets.target_inv.contains(p, 1e-9)) for p in traj.post]
    files = {
        "csv": _write(out / "trajectory.csv", traj.to_csv()),
        "json": _write(out / "trajectory.json", dumps(traj.to_dict())),
    }
    if plots and cfg.n == 2 and traj.steps:
        from .plotting import plot_trajectory

        files["figure"] = str(plot_trajectory(traj, sets, cfg.target, out / "trajectory.png"))
    summary = {
        "command": "simulate",
        "controller": controller,
        "steps_completed": traj.steps,
        "final_state": traj.post[-1].tolist(),
        "first_step_in_invariant": in_inv.index(True) if True in in_inv else None,
        "costs": [float(c) for c in ctrl.costs],
        "violations": None if rep is None else rep.to_dict(),
        "files": files,
    }
    if error:
        summary["error"] = error
    return summary, code


def cmd_check(cfg, x, which="state", samples=2001):
    """Admissibility of ``x`` w.r.t. the state set or the target, by SDP and by grid."""
    sys_ = cfg.system()
    Y = cfg.state_set if which == "state" else cfg.target
    S = SpectrahedronSet(sys_.modal, Y, cfg.period, cfg.feas_tol, cfg.marginal_tol)
    res = is_admissible(S, x, certificates=True)
    grid = grid_oracle(sys_.modal, Y, x, cfg.period, samples)
    summary = {
        "command": "check",
        "set": which,
        "x": np.asarray(x).tolist(),
        "sdp": res.to_dict(),
        "grid": {"admissible": grid, "samples": samples,
                 "max_excursion": max_facet_excursion(sys_.modal, Y, x, cfg.period, samples)},
        "agree": bool(res.admissible) == grid,
    }
    return summary, EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="impzone", description="Zone control of impulsively controlled linear systems.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="problem JSON (default: built-in two-state example)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="seed for randomized direction sets")
    common.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sets", parents=[common], help="compute admissible, invariant and equilibrium sets")
    s = sub.add_parser("simulate", parents=[common], help="closed-loop zone MPC simulation")
    s.add_argument("--controller", choices=("tracking", "setbased"), default="tracking")
    s.add_argument("--x0", help='initial state, e.g. "3.0,0.15"')
    s.add_argument("--steps", type=int, default=10)
    c = sub.add_parser("check", parents=[common], help="admissibility of one state, SDP vs grid")
    c.add_argument("--x", required=True, help='state, e.g. "3.0,0.15"')
    c.add_argument("--set", choices=("state", "target"), default="state", dest="which")
    c.add_argument("--samples", type=int, default=2001)
    return p


def _format_check(summary):
    sdp, grid = summary["sdp"], summary["grid"]
    margin = "n/a" if sdp["margin"] is None else f"{sdp['margin']:.3e}"
    return (
        f"x = {summary['x']} w.r.t. {summary['set']} set\n"
        f"  SDP certificate : {'admissible' if sdp['admissible'] else 'not admissible'} (margin {margin})\n"
        f"  grid ({grid['samples']:>5d} pts): {'admissible' if grid['admissible'] else 'not admissible'}"
        f" (max excursion {grid['max_excursion']:.3e})"
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        plots = not args.no_plots
        if args.command == "sets":
            summary, code = cmd_sets(cfg, plots)
        elif args.command == "simulate":
            if args.steps < 1:
                raise ConfigError("--steps must be at least 1")
            x0 = None if args.x0 is None else _vector(args.x0, cfg.n, "--x0")
            summary, code = cmd_simulate(cfg, args.controller, x0, args.steps, plots)
        else:
            x = _vector(args.x, cfg.n, "--x")
            summary, code = cmd_check(cfg, x, args.which, args.samples)
            print(_format_check(summary), file=sys.stderr)
    except (ConfigError, SpectrumError) as exc:
        summary, code = {"error": str(exc), "type": type(exc).__name__}, EXIT_CONFIG
    except SolverFailure as exc:
        summary, code = {"error": str(exc), "type": type(exc).__name__}, EXIT_SOLVER
    except InfeasibleProblem as exc:
        summary, code = {"error": str(exc), "type": type(exc).__name__}, EXIT_INFEASIBLE
    except ImpzoneError as exc:
        summary, code = {"error": str(exc), "type": type(exc).__name__}, EXIT_SOLVER
    if "error" in summary:
        summary["exit_code"] = code
    print(dumps(summary))
    return code


if __name__ == "__main__":
    sys.exit(main())
