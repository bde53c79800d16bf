"""
Command line entry point.

Every option can also be set through an environment variable named
``AFFINEPATH_<OPTION>`` (upper case, dashes as underscores, e.g.
``AFFINEPATH_SEED``); options given on the command line take precedence.
Exit codes: 0 success, 1 failure (violations, failed samples or a failed
statistical test), 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, dumps_params, load_params, load_sidecar, save_params, save_sidecar
from .export import write_cf_report, write_paths, write_riccati
from .levy import DEFAULT_MESH
from .params import classify_heston, validate
from .reduction import ReductionError, reduce
from .riccati import DEFAULT_ATOL, DEFAULT_RTOL, RiccatiEscapeError, solve_riccati
from .simulate import SimulationConfig, simulate
from .timechange import DEFAULT_LEVEL0, DEFAULT_LEVEL_CAP, DEFAULT_TAU_TOL
from .verify import DEFAULT_T_LIST, HarnessError, compare_cf, default_u_grid, mc_cf, riccati_predictions

ENV_PREFIX = "AFFINEPATH_"

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _complexes(text):
    try:
        return [complex(v.strip().replace(" ", "")) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated complex numbers, got {text!r}") from None


def read_u0_file(path):
    """One frequency vector per line given as pairs ``re im`` (commas or blanks between numbers)."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                nums = [float(v) for v in line.replace(",", " ").split()]
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: not numeric") from None
            if len(nums) % 2:
                raise ConfigError(f"{path}:{lineno}: odd number of values, expected re/im pairs")
            out.append(np.array(nums[0::2]) + 1j * np.array(nums[1::2]))
    if not out:
        raise ConfigError(f"{path}: no frequency vectors")
    return out


def _common(p, sim=False, ric=False):
    p.add_argument("--params", required=True, help="TOML parameter file")
    p.add_argument("--out", default=".", help="output directory")
    if sim:
        p.add_argument("--x0", type=_floats, required=True, help="initial state, comma separated")
        p.add_argument("--mesh", type=float, default=DEFAULT_MESH)
        p.add_argument("--level0", type=int, default=DEFAULT_LEVEL0)
        p.add_argument("--level-cap", type=int, default=DEFAULT_LEVEL_CAP)
        p.add_argument("--tau-tol", type=float, default=DEFAULT_TAU_TOL)
        p.add_argument("--samples", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    if ric:
        p.add_argument("--rtol", type=float, default=DEFAULT_RTOL)
        p.add_argument("--atol", type=float, default=DEFAULT_ATOL)
        p.add_argument("--u0", type=_complexes, action="append", help="frequency vector, e.g. '-1,0+1j'")
        p.add_argument("--u0-file", help="file with one frequency vector per line as re/im pairs")


def build_parser():
    parser = argparse.ArgumentParser(prog="affinepath", description="Pathwise simulation of affine processes.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check admissibility of a parameter file")
    _common(p)

    p = sub.add_parser("reduce", help="write the Heston-type parameter file and the frames sidecar")
    _common(p)

    p = sub.add_parser("riccati", help="tabulate phi and psi")
    _common(p, ric=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--n-grid", type=int, default=101)

    p = sub.add_parser("simulate", help="write sample paths")
    _common(p, sim=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--grid", type=int, default=512, help="number of uniform output nodes")
    p.add_argument("--invert-frames", metavar="SIDECAR", help="params is a reduced file; undo its frames")

    p = sub.add_parser("verify", help="Monte Carlo transform test against the Riccati prediction")
    _common(p, sim=True, ric=True)
    p.add_argument("--t-list", type=_floats, default=list(DEFAULT_T_LIST))
    p.add_argument("--z-threshold", type=float, default=3.0)
    return parser


def _apply_env(parser, argv):
    """Turn ``AFFINEPATH_*`` variables into defaults of the chosen subcommand."""
    command = next((a for a in argv if a in COMMANDS), None)
    if command is None:
        return
    subparser = parser._subparsers._group_actions[0].choices[command]
    defaults = {}
    for action in subparser._actions:
        if not action.option_strings or action.dest == "help":
            continue
        value = os.environ.get(ENV_PREFIX + action.dest.upper())
        if value is None:
            continue
        if action.type is not None:
            try:
                value = action.type(value)
            except (argparse.ArgumentTypeError, ValueError):
                raise UsageError(f"{ENV_PREFIX}{action.dest.upper()}: invalid value {value!r}") from None
        if action.dest == "u0":
            value = [value]
        defaults[action.dest] = value
        action.required = False
    subparser.set_defaults(**defaults)


def _header(args, params_text):
    lines = [f"affinepath {args.command}"]
    for key, value in sorted(vars(args).items()):
        if key in ("command", "verbose", "workers"):
            continue
        lines.append(f"{key} = {value}")
    lines.append("parameters:")
    lines += ["  " + line for line in params_text.splitlines()]
    return lines


def _check_positive(**values):
    for name, value in values.items():
        if value is None or not value > 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")


def _u0_list(args, dim):
    us = []
    if args.u0:
        us += [np.array(u, dtype=complex) for u in args.u0]
    if args.u0_file:
        us += read_u0_file(args.u0_file)
    for u in us:
        if u.size != dim.d:
            raise UsageError(f"frequency vector {u} has length {u.size}, expected {dim.d}")
    return us


def _sim_config(args, params, plan=None, times=None):
    _check_positive(T=args.T, mesh=args.mesh, tau_tol=args.tau_tol, samples=args.samples)
    if args.level0 < 0 or args.level_cap < args.level0:
        raise UsageError("need 0 <= level0 <= level-cap")
    try:
        return SimulationConfig(
            params,
            np.array(args.x0),
            args.T,
            mesh=args.mesh,
            level0=args.level0,
            level_cap=args.level_cap,
            tau_tol=args.tau_tol,
            seed=args.seed,
            times=times,
            plan=plan,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_validate(args, params):
    report = validate(params)
    print(report)
    if report.ok:
        print("heston-type flags: married={} H={} ring={}".format(*classify_heston(params)))
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_reduce(args, params):
    report = validate(params)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_FAIL
    try:
        plan = reduce(params)
    except ReductionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(args, dumps_params(params))
    save_params(plan.augmented, out / "heston.toml", header)
    save_sidecar(plan, out / "frames.json")
    print(f"wrote {out / 'heston.toml'} and {out / 'frames.json'}")
    return EXIT_OK


def cmd_riccati(args, params):
    _check_positive(T=args.T, rtol=args.rtol, atol=args.atol, n_grid=args.n_grid)
    us = _u0_list(args, params.dim)
    if not us:
        raise UsageError("give at least one --u0 or --u0-file")
    sols = []
    try:
        for u in us:
            sols.append(solve_riccati(params, u, args.T, args.rtol, args.atol, n_grid=args.n_grid))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except RiccatiEscapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "riccati.csv", "w") as fh:
        write_riccati(fh, sols, _header(args, dumps_params(params)))
    return EXIT_OK


def cmd_simulate(args, params):
    plan = None
    if args.invert_frames:
        plan = load_sidecar(args.invert_frames, params)
        original = plan.original
    else:
        original = params
    if not validate(original).ok:
        print(validate(original), file=sys.stderr)
        return EXIT_FAIL
    _check_positive(grid=args.grid - 1)
    cfg = _sim_config(args, original, plan, times=np.linspace(0.0, args.T, args.grid))
    paths = simulate(cfg, args.samples, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "paths.csv", "w") as fh:
        write_paths(fh, paths, _header(args, dumps_params(params)))
    failed = sum(isinstance(p, Exception) for p in paths)
    if failed:
        print(f"{failed} of {len(paths)} samples failed", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_verify(args, params):
    report = validate(params)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_FAIL
    t_list = sorted(set(args.t_list))
    if not t_list or min(t_list) <= 0:
        raise UsageError("--t-list needs positive times")
    args.T = max(t_list)
    _check_positive(rtol=args.rtol, atol=args.atol, z_threshold=args.z_threshold)
    if args.samples < 100:
        raise UsageError("--samples must be at least 100")
    cfg = _sim_config(args, params)
    us = _u0_list(args, params.dim) or default_u_grid(params.dim)
    try:
        est = mc_cf(cfg, us, t_list, args.samples, workers=args.workers)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        pred = riccati_predictions(params, cfg.x0, us, t_list, args.rtol, args.atol)
    except RiccatiEscapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    result = compare_cf(est, pred, args.z_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "verify_report.csv", "w") as fh:
        write_cf_report(fh, result, _header(args, dumps_params(params)))
    print(f"{result.n_flagged} of {len(result.points)} points flagged, p-value {result.p_value:.4g}: "
          + ("pass" if result.passed else "fail"))
    return EXIT_OK if result.passed else EXIT_FAIL


COMMANDS = {
    "validate": cmd_validate,
    "reduce": cmd_reduce,
    "riccati": cmd_riccati,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_env(parser, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        params = load_params(args.params)
        return COMMANDS[args.command](args, params)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
