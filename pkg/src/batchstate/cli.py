"""Command-line front end.

Subcommands: ``simulate`` (write noisy trajectories), ``estimate`` (batch
filter or dead-beat observers on a measurement CSV), and ``experiment
ex1|ex2|ex3`` (the Monte Carlo harnesses).  Every command is deterministic
under a fixed seed; the environment variable ``BATCHSTATE_SEED`` provides the
default master seed.

Exit codes: 2 for bad flags or invalid values, 3 for dimension mismatches,
4 for unobservable models, 1 when an experiment cell failed entirely.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import experiments
from .errors import DimensionMismatchError, NotObservableOrIllConditioned
from .estimator import NormalSystem, solve_estimate
from .model import (LinearModel, NoiseSpec, example2_model,
                    measurements_from_csv, measurements_to_csv, simulate,
                    trajectory_from_csv, trajectory_to_csv)
from .nonlinear import FitConfig
from .observers import deadbeat_full, deadbeat_sliding, relative_error

__all__ = ["main", "run"]

EXIT_USAGE = 2
EXIT_DIMENSION = 3
EXIT_UNOBSERVABLE = 4


class UsageError(ValueError):
    pass


def _default_seed() -> int:
    return int(os.environ.get("BATCHSTATE_SEED", "0"))


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise UsageError("--config must contain a JSON object")
    return doc


def _resolve(args, config, key, default):
    """Flag > config file > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _load_model(args) -> LinearModel:
    if getattr(args, "example2", False):
        return example2_model()
    if getattr(args, "model", None):
        with open(args.model) as fh:
            return LinearModel.from_json(fh.read())
    raise UsageError("a model is required: pass --model <json> or --example2")


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v != ""])
    except ValueError as exc:
        raise UsageError(f"could not parse vector {text!r}: {exc}") from None


def _parse_float_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    try:
        return tuple(float(v) for v in str(text).split(",") if v != "")
    except ValueError as exc:
        raise UsageError(f"could not parse list {text!r}: {exc}") from None


def _parse_int_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(v) for v in str(text).split(",") if v != "")
    except ValueError as exc:
        raise UsageError(f"could not parse list {text!r}: {exc}") from None


def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    model = _load_model(args)
    sigma_nu = float(_resolve(args, config, "sigma_nu", 0.0))
    sigma_mu = float(_resolve(args, config, "sigma_mu", 0.0))
    N = _resolve(args, config, "N", None)
    if N is None:
        raise UsageError("--N is required")
    N = int(N)
    if N < 1:
        raise UsageError("--N must be >= 1")
    if sigma_nu < 0 or sigma_mu < 0:
        raise UsageError("noise levels must be >= 0")
    seed = int(_resolve(args, config, "seed", _default_seed()))
    x1_text = _resolve(args, config, "x1", None)
    if x1_text is None:
        x1 = np.ones(model.n)  # the benchmark's standard all-ones start
    else:
        x1 = _parse_vector(x1_text) if isinstance(x1_text, str) else np.asarray(x1_text, dtype=float)

    traj, ms = simulate(model, x1, NoiseSpec(sigma_nu, sigma_mu, seed), N)
    trajectory_to_csv(traj, f"{args.out}_x.csv")
    measurements_to_csv(ms, f"{args.out}_y.csv")
    print(f"wrote {args.out}_x.csv and {args.out}_y.csv ({N} rows)")
    return 0


def _cmd_estimate(args) -> int:
    config = _load_config(args.config)
    model = _load_model(args)
    rho = float(_resolve(args, config, "rho", 1.0))
    if rho <= 0:
        raise UsageError("--rho must be positive")
    ms = measurements_from_csv(args.y)

    report_doc = {"method": args.method, "rho": rho}
    if args.method == "batch":
        normal = NormalSystem(model, rho=rho, N=ms.horizon)
        report = solve_estimate(normal, ms)
        xhat = report.xhat
        report_doc["loss"] = report.loss_value
        report_doc["residual_norms"] = {
            "model": float(np.linalg.norm(report.model_residuals)),
            "output": float(np.linalg.norm(report.output_residuals)),
        }
    elif args.method == "db":
        xhat = deadbeat_full(model, ms)
    else:
        xhat = deadbeat_sliding(model, ms)

    if args.truth:
        truth = trajectory_from_csv(args.truth)
        report_doc["relative_error"] = relative_error(xhat, truth)

    trajectory_to_csv(xhat, f"{args.out}_xhat.csv")
    with open(f"{args.out}_report.json", "w") as fh:
        json.dump(report_doc, fh, indent=2)
    print(f"wrote {args.out}_xhat.csv and {args.out}_report.json")
    if "relative_error" in report_doc:
        print(f"relative_error {report_doc['relative_error']:.6g}")
    if "loss" in report_doc:
        print(f"loss {report_doc['loss']:.6g}")
    return 0


def _cmd_experiment_ex1(args, config) -> int:
    rhos = _parse_float_list(_resolve(args, config, "rhos", (0.1, 1.0, 10.0)))
    N = int(_resolve(args, config, "N", 5))
    if any(r <= 0 for r in rhos):
        raise UsageError("--rhos must all be positive")
    pairs = experiments.run_example1(rhos, N)
    paths = experiments.example1_to_files(pairs, args.out)
    summary = {"experiment": "example1_filters", "config": {"rhos": list(rhos), "N": N},
               "files": [os.path.basename(p) for p in paths]}
    with open(f"{args.out}_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    for rho, path in zip(rhos, paths):
        print(f"rho={rho:g}: wrote {path}")
    return 0


def _cmd_experiment_ex2(args, config) -> int:
    master_seed = int(_resolve(args, config, "master_seed", _default_seed()))
    kwargs = {}
    sigmas = _resolve(args, config, "sigmas", None)
    if sigmas is not None:
        kwargs["sigma_nu_values"] = _parse_float_list(sigmas)
    n_values = _resolve(args, config, "grid_n", None)
    if n_values is not None:
        kwargs["N_values"] = _parse_int_list(n_values)
    trials = _resolve(args, config, "trials", None)
    if trials is not None:
        kwargs["trials"] = int(trials)
    rho = _resolve(args, config, "rho", None)
    if rho is not None:
        if float(rho) <= 0:
            raise UsageError("--rho must be positive")
        kwargs["rho"] = float(rho)
    grid = experiments.GridSpec(master_seed=master_seed, **kwargs)
    report = experiments.run_example2(grid)

    experiments.grid_report_to_csv(report, f"{args.out}_grid.csv")
    with open(f"{args.out}_summary.json", "w") as fh:
        fh.write(experiments.grid_report_to_json(report))
    for method in experiments.METHODS:
        experiments.grid_report_to_matrix_txt(
            report, method, f"{args.out}_matrix_{method}.txt")
    any_empty = False
    for cell in report.cells:
        line = " ".join(f"{m}={cell.mean_err[m]:.6g}" for m in experiments.METHODS)
        print(f"sigma_nu={cell.sigma_nu:g} N={cell.N}: {line}")
        if all(v == 0 for v in cell.trials_ok.values()):
            any_empty = True
    print(f"wrote {args.out}_grid.csv and {args.out}_summary.json")
    return 1 if any_empty else 0


def _cmd_experiment_ex3(args, config) -> int:
    master_seed = int(_resolve(args, config, "master_seed", _default_seed()))
    sigmas = _parse_float_list(_resolve(args, config, "sigmas", (0.0, 0.1, 0.2, 0.5, 1.0)))
    trials = int(_resolve(args, config, "trials", 10))
    N = int(_resolve(args, config, "N", 100))
    if any(s < 0 for s in sigmas):
        raise UsageError("--sigmas must be >= 0")
    fit_kwargs = {}
    for key in ("rho", "lam", "eta", "max_iters"):
        value = _resolve(args, config, key, None)
        if value is not None:
            fit_kwargs[key] = int(value) if key == "max_iters" else float(value)
    fit_config = FitConfig(**fit_kwargs)

    report = experiments.run_example3(sigmas, trials=trials, config=fit_config,
                                      N=N, master_seed=master_seed)
    experiments.example3_report_to_csv(report, f"{args.out}_trials.csv")
    with open(f"{args.out}_summary.json", "w") as fh:
        fh.write(experiments.example3_report_to_json(report))
    any_empty = False
    for row in report.summary():
        print(f"sigma_mu={row['sigma_mu']:g}: err_X={row['mean_err_x']:.6g} "
              f"err_Theta={row['mean_err_theta']:.6g} "
              f"ok={row['trials_ok']} failed={row['trials_failed']}")
        if row["trials_ok"] == 0:
            any_empty = True
    print(f"wrote {args.out}_trials.csv and {args.out}_summary.json")
    return 1 if any_empty else 0


def _cmd_experiment(args) -> int:
    config = _load_config(args.config)
    if args.which == "ex1":
        return _cmd_experiment_ex1(args, config)
    if args.which == "ex2":
        return _cmd_experiment_ex2(args, config)
    return _cmd_experiment_ex3(args, config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="batchstate",
        description="Batch trajectory estimation, observer baselines, and "
                    "Monte Carlo experiment harnesses.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a noisy linear model")
    sim.add_argument("--model", help="path to a model JSON document")
    sim.add_argument("--example2", action="store_true",
                     help="use the built-in 10-state companion benchmark")
    sim.add_argument("--x1", help="comma-separated initial state (default: all ones)")
    sim.add_argument("--sigma-nu", dest="sigma_nu", type=float)
    sim.add_argument("--sigma-mu", dest="sigma_mu", type=float)
    sim.add_argument("--N", dest="N", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", required=True, help="output file prefix")
    sim.add_argument("--config", help="JSON config file (flags win)")
    sim.set_defaults(func=_cmd_simulate)

    est = sub.add_parser("estimate", help="estimate a trajectory from measurements")
    est.add_argument("--method", choices=("batch", "db", "sdb"), required=True)
    est.add_argument("--rho", type=float)
    est.add_argument("--model", help="path to a model JSON document")
    est.add_argument("--example2", action="store_true")
    est.add_argument("--y", required=True, help="measurement CSV (t,y)")
    est.add_argument("--truth", help="optional truth CSV for a relative error")
    est.add_argument("--out", required=True)
    est.add_argument("--config", help="JSON config file (flags win)")
    est.set_defaults(func=_cmd_estimate)

    exp = sub.add_parser("experiment", help="run one of the standard experiments")
    exp_sub = exp.add_subparsers(dest="which", required=True)

    ex1 = exp_sub.add_parser("ex1", help="filter matrices for A=C=1")
    ex1.add_argument("--rhos", help="comma-separated weights (default 0.1,1,10)")
    ex1.add_argument("--N", dest="N", type=int)
    ex1.add_argument("--out", required=True)
    ex1.add_argument("--config")
    ex1.set_defaults(func=_cmd_experiment)

    ex2 = exp_sub.add_parser("ex2", help="observer comparison grid")
    ex2.add_argument("--sigmas", help="comma-separated sigma_nu values")
    ex2.add_argument("--grid-n", dest="grid_n", help="comma-separated horizons")
    ex2.add_argument("--trials", type=int)
    ex2.add_argument("--rho", type=float)
    ex2.add_argument("--master-seed", dest="master_seed", type=int)
    ex2.add_argument("--out", required=True)
    ex2.add_argument("--config")
    ex2.set_defaults(func=_cmd_experiment)

    ex3 = exp_sub.add_parser("ex3", help="Henon reconstruction noise sweep")
    ex3.add_argument("--sigmas", help="comma-separated sigma_mu values")
    ex3.add_argument("--trials", type=int)
    ex3.add_argument("--N", dest="N", type=int)
    ex3.add_argument("--rho", type=float)
    ex3.add_argument("--lambda", dest="lam", type=float)
    ex3.add_argument("--eta", type=float)
    ex3.add_argument("--max-iters", dest="max_iters", type=int)
    ex3.add_argument("--master-seed", dest="master_seed", type=int)
    ex3.add_argument("--out", required=True)
    ex3.add_argument("--config")
    ex3.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # invalid values (negative noise levels, bad weights, malformed files)
        if isinstance(exc, DimensionMismatchError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIMENSION
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotObservableOrIllConditioned as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNOBSERVABLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
