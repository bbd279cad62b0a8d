"""Command line interface.

Three subcommands:

``fit``       estimate the treatment effect on one CSV dataset
``simulate``  run a Monte Carlo study and write report.csv / timings.csv /
              dump.json into an output directory
``report``    re-render the summary table from a stored dump.json without
              recomputing anything

Exit codes: 0 success, 2 file/schema/configuration problems, 3 convergence
failures (for simulate: more than 5% of replications failed; outputs are
still written), 4 degenerate data (an arm empty or without uncensored
records). Errors are reported as a JSON object on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .censoring import fit_censoring_km
from .data import parse_csv
from .errors import (
    ConfigError,
    DegenerateArmError,
    DumpFormatError,
    FitError,
    InputError,
    RowParseError,
    SchemaError,
    SingularMatrixError,
)
from .inference import ate_with_ci
from .scad import ScadParams
from .simulation import (
    SCHEMA_VERSION,
    SimConfig,
    SimReport,
    load_config,
    run_study,
    write_outputs,
)
from .solver import FitOptions, default_tau_grid, fit_pel, select_tau

_EXIT_OK = 0
_EXIT_INPUT = 2
_EXIT_CONVERGENCE = 3
_EXIT_DEGENERATE = 4


def _fail(category: str, message: str, code: int) -> int:
    print(json.dumps({"error": {"category": category, "message": message}}))
    return code


def _parse_seed(text: str) -> int:
    if text == "random":
        return int(np.random.SeedSequence().generate_state(1)[0])
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"--seed must be an integer or 'random', got {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="survcbps",
        description=(
            "Treatment effect estimation for right-censored outcomes with "
            "covariate-balancing propensity scores"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="estimate the ATE from a CSV dataset")
    fit.add_argument("--data", required=True, help="input CSV path")
    fit.add_argument("--tau", type=float, default=None,
                     help="fixed penalty level (overrides the grid)")
    fit.add_argument("--tau-grid", default="auto",
                     help="'auto' or a comma-separated list of levels")
    fit.add_argument("--level", type=float, default=0.95)
    fit.add_argument("--out", default=None, help="output JSON path (default stdout)")
    fit.add_argument("--seed", default="42")
    fit.add_argument("--clip", type=float, default=0.01)
    fit.add_argument("--km-floor", type=float, default=0.05)

    sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("--config", default=None, help="flat key = value file")
    sim.add_argument("--out-dir", default="sim_out")
    sim.add_argument("--workers", type=int, default=1)
    for flag, typ in (
        ("--n", int), ("--p", int), ("--replications", int),
        ("--beta-nonzero", int), ("--gamma-nonzero", int), ("--n-boot", int),
        ("--beta-magnitude", float), ("--gamma-magnitude", float),
        ("--lambda0", float), ("--weibull-k", float), ("--censor-target", float),
        ("--ar-rho", float), ("--clip", float), ("--km-floor", float),
        ("--level", float),
    ):
        sim.add_argument(flag, type=typ, default=None)
    sim.add_argument("--covariance", choices=("identity", "ar"), default=None)
    sim.add_argument("--estimators", default=None,
                     help="comma-separated list, e.g. proposed,naive_ipw")
    sim.add_argument("--seed", default=None)

    rep = sub.add_parser("report", help="re-render tables from a dump.json")
    rep.add_argument("--in", dest="infile", required=True)
    return parser


def _fit_doc(args, data, tau, fit, result) -> dict:
    names = list(data.covariate_names)
    active = [int(j) for j in fit.active_set]
    return {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "n": data.n,
        "p": data.p,
        "seed": args.seed,
        "tau": tau,
        "converged": bool(fit.converged),
        "active_set": active,
        "active_covariates": [names[j] for j in active],
        "beta": {names[j]: float(fit.beta_hat[j]) for j in active},
        "diagnostics": {
            "outer_iterations": int(fit.outer_iterations),
            "objective_final": float(fit.objective_trace[-1]),
            "inner_grad_norm": float(fit.dual.grad_norm),
            "inner_converged": bool(fit.dual.converged),
        },
        "result": result.to_dict(),
    }


def _emit(doc: dict, out_path) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


def cmd_fit(args) -> int:
    try:
        seed = _parse_seed(args.seed)
    except ConfigError as exc:
        return _fail("config", str(exc), _EXIT_INPUT)
    args.seed = seed
    try:
        data = parse_csv(args.data)
    except FileNotFoundError:
        return _fail("file", f"no such file: {args.data}", _EXIT_INPUT)
    except (SchemaError, RowParseError, InputError) as exc:
        return _fail("schema", str(exc), _EXIT_INPUT)
    except DegenerateArmError as exc:
        return _fail("degenerate", str(exc), _EXIT_DEGENERATE)
    try:
        k1 = fit_censoring_km(data, 1, floor=args.km_floor)
        k0 = fit_censoring_km(data, 0, floor=args.km_floor)
        opts = FitOptions(clip=args.clip)
        if args.tau is not None:
            tau = float(args.tau)
            fit = fit_pel(data, k1, k0, ScadParams(lam=tau), opts)
        elif args.tau_grid == "auto":
            tau, fit = select_tau(data, k1, k0, opts=opts)
        else:
            try:
                grid = [float(s) for s in args.tau_grid.split(",") if s.strip()]
            except ValueError:
                return _fail("config", f"bad --tau-grid: {args.tau_grid!r}",
                             _EXIT_INPUT)
            tau, fit = select_tau(data, k1, k0, grid=grid, opts=opts)
        result = ate_with_ci(data, fit, k1, k0, level=args.level)
    except DegenerateArmError as exc:
        return _fail("degenerate", str(exc), _EXIT_DEGENERATE)
    except (FitError, SingularMatrixError) as exc:
        return _fail("convergence", str(exc), _EXIT_CONVERGENCE)
    except InputError as exc:
        return _fail("config", str(exc), _EXIT_INPUT)
    _emit(_fit_doc(args, data, tau, fit, result), args.out)
    if not fit.converged:
        print("warning: propensity fit did not converge", file=sys.stderr)
        return _EXIT_CONVERGENCE
    return _EXIT_OK


def cmd_simulate(args) -> int:
    overrides = {}
    mapping = {
        "n": args.n, "p": args.p, "replications": args.replications,
        "beta_nonzero": args.beta_nonzero, "gamma_nonzero": args.gamma_nonzero,
        "beta_magnitude": args.beta_magnitude,
        "gamma_magnitude": args.gamma_magnitude,
        "lambda0": args.lambda0, "weibull_k": args.weibull_k,
        "censor_target": args.censor_target, "ar_rho": args.ar_rho,
        "clip": args.clip, "km_floor": args.km_floor, "level": args.level,
        "covariance": args.covariance, "n_boot": args.n_boot,
    }
    for key, val in mapping.items():
        if val is not None:
            overrides[key] = val
    if args.estimators is not None:
        overrides["estimators"] = tuple(
            s.strip() for s in args.estimators.split(",") if s.strip()
        )
    try:
        if args.seed is not None:
            overrides["seed"] = _parse_seed(args.seed)
        if args.config is not None:
            config = load_config(args.config, overrides)
        else:
            config = SimConfig(**overrides)
    except FileNotFoundError:
        return _fail("file", f"no such file: {args.config}", _EXIT_INPUT)
    except ConfigError as exc:
        return _fail("config", str(exc), _EXIT_INPUT)
    if args.workers < 1:
        return _fail("config", "--workers must be >= 1", _EXIT_INPUT)
    report = run_study(config, workers=args.workers)
    paths = write_outputs(report, args.out_dir)
    print(report.render_table())
    print(
        f"wrote {paths['report']}, {paths['timings']}, {paths['dump']}",
        file=sys.stderr,
    )
    if report.failure_flagged:
        print("warning: more than 5% of replications failed", file=sys.stderr)
        return _EXIT_CONVERGENCE
    return _EXIT_OK


def cmd_report(args) -> int:
    try:
        with open(args.infile) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        return _fail("file", f"no such file: {args.infile}", _EXIT_INPUT)
    except json.JSONDecodeError as exc:
        return _fail("dump", f"not valid JSON: {exc}", _EXIT_INPUT)
    try:
        report = SimReport.from_dump(doc)
    except DumpFormatError as exc:
        return _fail("dump", str(exc), _EXIT_INPUT)
    print(report.render_table())
    return _EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "fit":
        return cmd_fit(args)
    if args.command == "simulate":
        return cmd_simulate(args)
    return cmd_report(args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
