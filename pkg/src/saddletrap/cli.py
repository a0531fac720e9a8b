"""Command-line front end.

    saddletrap [--config FILE] [--out DIR] [--dt DT] [--seedless] [--plot] COMMAND ...

Commands: simulate, verify, residual, stability, precession. Data files are
deterministic; wall-clock time goes only into ``manifest.json``.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import random
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import dynamics as dyn
from . import normalform as nf
from .integrator import BlowUpError

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NO_TRANSITION, EXIT_FIT = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    return path


@contextlib.contextmanager
def no_rng():
    """Make any use of a random number generator fail loudly."""

    def forbidden(*_, **__):
        raise RuntimeError("random number generator used in a --seedless run")

    targets = [(np.random, n) for n in ("default_rng", "seed", "rand", "randn", "random", "RandomState")]
    targets += [(random, n) for n in ("random", "seed", "uniform", "gauss")]
    saved = [(mod, n, getattr(mod, n)) for mod, n in targets]
    for mod, n in targets:
        setattr(mod, n, forbidden)
    try:
        yield
    finally:
        for mod, n, fn in saved:
            setattr(mod, n, fn)


# -- option resolution -----------------------------------------------------------------

def _pick(args, config: dict, name: str, default=None):
    val = getattr(args, name, None)
    if val is not None:
        return val
    return config.get(name, default)


def _load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_CONFIG)
    if not isinstance(data, dict):
        raise CliError("config must be a JSON object", EXIT_CONFIG)
    return data


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise CliError(f"bad number list {text!r}", EXIT_CONFIG) from exc


# -- commands ----------------------------------------------------------------------------

def cmd_simulate(args, config, out: Path) -> tuple[dict, list[Path]]:
    eps = _pick(args, config, "epsilon", _pick(args, config, "eps"))
    try:
        cfg = dyn.SimConfig(
            epsilon=float(eps) if eps is not None else math.nan,
            t_end=float(_pick(args, config, "t_end", 200.0)),
            dt=_pick(args, config, "dt"),
            initial=tuple(_pick(args, config, "initial", (1.0, 0.0, 0.0, 0.0))),
            frame=_pick(args, config, "frame", "inertial"),
            sample_every=int(_pick(args, config, "sample_every", 10)),
        )
    except (dyn.ConfigError, ValueError, TypeError) as exc:
        raise CliError(f"invalid configuration: {exc}", EXIT_CONFIG)
    try:
        traj = an.simulate(cfg.frame, cfg.epsilon, cfg.initial, cfg.t_end, cfg.dt, cfg.sample_every)
    except BlowUpError as exc:
        raise CliError(f"integration blew up at t={exc.t:.17g}", EXIT_BLOWUP)
    s = traj.states
    if cfg.frame is dyn.Frame.INERTIAL:
        u = dyn.guiding_center(s[:, :2], s[:, 2:], traj.times, cfg.epsilon)
        ucols = [[fmt(a), fmt(b)] for a, b in u]
    else:
        u = None
        ucols = [["", ""]] * len(s)
    rows = ([fmt(t)] + [fmt(c) for c in z] + uc for t, z, uc in zip(traj.times, s, ucols))
    files = [write_csv(out / "trajectory.csv", ["t", "x1", "x2", "v1", "v2", "u1", "u2"], rows)]
    if args.plot:
        from .plotting import plot_trajectory
        files.append(plot_trajectory(s[:, :2], u, out / "trajectory.png",
                                     f"eps = {cfg.epsilon:g}, frame = {cfg.frame.value}"))
    print(f"wrote {len(s)} samples to {files[0]}")
    return cfg.to_dict() | {"dt_effective": traj.meta["dt"]}, files


def cmd_verify(args, config, out: Path) -> tuple[dict, list[Path]]:
    overrides = None
    if args.tamper == "T2":
        overrides = {"T2": nf.build_reduction().T2.scale(-1)}
    report = nf.verification_report(overrides)
    path = Path(args.report) if args.report else out / "verify.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(nf.report_json(report))
    for c in report["identities"]:
        tag = "PASS" if c["passed"] else ("INFO" if c["informational"] else "FAIL")
        print(f"[{tag}] {c['name']}")
    for o in report["obstructions"]:
        print(f"[{'PASS' if not o['feasible'] else 'FAIL'}] contact transform k={o['k']} infeasible: "
              f"{o['certificate']}")
    ctrl = report["control"]
    print(f"[{'PASS' if ctrl['feasible'] else 'FAIL'}] velocity-coupled transform feasible")
    if not report["passed"]:
        raise CliError(f"identity failed: {report['first_failure']}", EXIT_VERIFY)
    return {"report": str(path)}, [path]


def cmd_residual(args, config, out: Path) -> tuple[dict, list[Path]]:
    raw = _pick(args, config, "eps_list")
    if raw is None:
        raise CliError("--eps-list is required", EXIT_CONFIG)
    eps_list = _float_list(raw)
    if len(eps_list) < 3:
        raise CliError("need at least three epsilon values", EXIT_CONFIG)
    if len(set(eps_list)) != len(eps_list):
        raise CliError("duplicate epsilon values", EXIT_CONFIG)
    horizon = float(_pick(args, config, "horizon", 50.0))
    dt_factor = float(_pick(args, config, "dt_factor", an.DT_FACTOR))
    try:
        rep = an.residual_scan(eps_list, horizon, dt_factor=dt_factor)
    except (ValueError, an.DegenerateInputError) as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    files = [
        write_csv(out / "residual.csv", ["epsilon", "max_residual"],
                  ([fmt(e), fmt(r)] for e, r in zip(rep.epsilons, rep.max_residuals))),
        write_json(out / "residual.json", rep.to_dict()),
    ]
    if args.plot:
        from .plotting import plot_residual
        files.append(plot_residual(rep.epsilons, rep.max_residuals, rep.fitted_slope, out / "residual.png"))
    print(f"fitted slope {rep.fitted_slope:.6f}")
    return {"eps_list": eps_list, "horizon": horizon, "dt_factor": dt_factor}, files


def cmd_stability(args, config, out: Path) -> tuple[dict, list[Path]]:
    lo = float(_pick(args, config, "eps_min", 0.5))
    hi = float(_pick(args, config, "eps_max", 1.5))
    n = int(_pick(args, config, "n", 64))
    dt_factor = float(_pick(args, config, "dt_factor", an.DT_FACTOR))
    try:
        sweep = an.stability_sweep(lo, hi, n, dt_factor)
    except an.NoTransitionError as exc:
        raise CliError(f"no transition: {exc}", EXIT_NO_TRANSITION)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    rows = ([fmt(e), fmt(m), "1" if s else "0"]
            for e, m, s in zip(sweep.epsilons, sweep.max_moduli, sweep.stable))
    files = [
        write_csv(out / "stability.csv", ["epsilon", "max_multiplier_modulus", "stable"], rows),
        write_json(out / "stability.json", sweep.to_dict()),
    ]
    if args.plot:
        from .plotting import plot_stability
        files.append(plot_stability(sweep.epsilons, sweep.max_moduli, sweep.eps_critical, out / "stability.png"))
    print(f"eps_c = {sweep.eps_critical:.6f}")
    return {"eps_min": lo, "eps_max": hi, "n": n, "dt_factor": dt_factor}, files


def cmd_precession(args, config, out: Path) -> tuple[dict, list[Path]]:
    eps = _pick(args, config, "eps", _pick(args, config, "epsilon"))
    if eps is None:
        raise CliError("--eps is required", EXIT_CONFIG)
    eps = float(eps)
    frame = _pick(args, config, "frame", "averaged")
    horizon = _pick(args, config, "horizon")
    try:
        rep = an.precession_rate(eps, frame, float(horizon) if horizon else None)
    except an.FitError as exc:
        raise CliError(f"fit failed: {exc}", EXIT_FIT)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    files = [write_json(out / "precession.json", rep.to_dict())]
    if args.plot:
        from .plotting import plot_precession
        t, u = an.guiding_center_signal(eps, frame, horizon or an.precession_horizon(eps), None)
        files.append(plot_precession(t, u, out / "precession.png", rep.measured_rate))
    print(f"rate {rep.measured_rate:.6e} ({rep.sign}), predicted {rep.predicted_rate:.6e}, "
          f"relative error {rep.relative_error:.3e}")
    return {"eps": eps, "frame": frame, "horizon": horizon}, files


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "residual": cmd_residual,
    "stability": cmd_stability,
    "precession": cmd_precession,
}


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON file with command options (flags win)")
    p.add_argument("--out", default=d if suppress else ".", help="output directory")
    p.add_argument("--dt", type=float, default=d, help="integration step for simulate (default eps/50)")
    p.add_argument("--seedless", action="store_true", default=d if suppress else False,
                   help="fail if any random number generator is touched")
    p.add_argument("--plot", action="store_true", default=d if suppress else False,
                   help="also render PNG figures next to the data files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saddletrap", description="Rotating saddle trap experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="integrate one trajectory to CSV")
    p.add_argument("--eps", "--epsilon", dest="epsilon", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--frame", choices=[f.value for f in dyn.Frame])
    p.add_argument("--initial", nargs=4, type=float, metavar=("X1", "X2", "V1", "V2"))
    p.add_argument("--sample-every", dest="sample_every", type=int)

    p = sub.add_parser("verify", parents=[common], help="exact check of the normal-form reduction")
    p.add_argument("--report", help="JSON report path (default OUT/verify.json)")
    p.add_argument("--tamper", choices=["T2"], help=argparse.SUPPRESS)

    p = sub.add_parser("residual", parents=[common], help="residual scaling of the guiding-center equation")
    p.add_argument("--eps-list", dest="eps_list", help="comma-separated epsilon values (at least 3)")
    p.add_argument("--horizon", type=float)
    p.add_argument("--dt-factor", dest="dt_factor", type=float, help=argparse.SUPPRESS)

    p = sub.add_parser("stability", parents=[common], help="Floquet stability sweep and threshold")
    p.add_argument("--eps-min", dest="eps_min", type=float)
    p.add_argument("--eps-max", dest="eps_max", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--dt-factor", dest="dt_factor", type=float, help=argparse.SUPPRESS)

    p = sub.add_parser("precession", parents=[common], help="precession rate of the guiding center")
    p.add_argument("--eps", type=float)
    p.add_argument("--frame", choices=["averaged", "full", "naive"])
    p.add_argument("--horizon", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    started = time.perf_counter()
    try:
        config = _load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        guard = no_rng() if args.seedless else contextlib.nullcontext()
        with guard:
            resolved, files = COMMANDS[args.command](args, config, out)
    except CliError as exc:
        print(f"saddletrap {args.command}: {exc}", file=sys.stderr)
        return exc.code
    manifest = {
        "command": args.command,
        "config": resolved,
        "version": __version__,
        "seedless": bool(args.seedless),
        "duration_s": round(time.perf_counter() - started, 6),
        "outputs": [str(f) for f in files],
    }
    write_json(out / "manifest.json", manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
