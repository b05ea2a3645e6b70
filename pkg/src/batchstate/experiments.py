"""Seeded Monte Carlo harnesses for the three standard experiments.

Every random quantity is drawn from a generator seeded by a stable hash of
``(master_seed, cell, trial)``, so cells are independent, individually
re-runnable, and the full report is reproducible byte for byte from the
master seed alone regardless of execution order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergenceError, FitDivergedError, NotObservableOrIllConditioned
from .estimator import NormalSystem, filter_matrix, filter_matrix_to_csv, solve_estimate
from .model import (FLOAT_FMT, LinearModel, NoiseSpec, example2_model,
                    example2_x1, simulate)
from .nonlinear import FitConfig, HenonParams, fit, henon_simulate, theta_summary
from .observers import deadbeat_full, deadbeat_sliding, relative_error

__all__ = [
    "derive_seed",
    "GridSpec",
    "GridCell",
    "GridReport",
    "Example3Trial",
    "Example3Report",
    "run_example1",
    "run_example2",
    "run_example3",
    "grid_report_to_csv",
    "grid_report_to_json",
    "grid_report_to_matrix_txt",
    "example3_report_to_csv",
    "example3_report_to_json",
    "example1_to_files",
]

# Rejection bound for "non-divergent" Henon initial conditions: resample when
# the noiseless first state leaves [-10, 10] within the horizon.
HENON_KEEP_BOUND = 10.0
HENON_MAX_ATTEMPTS = 1000

METHODS = ("batch", "db", "sdb")


def derive_seed(master_seed: int, *key) -> int:
    """Stable 64-bit seed for one (cell, trial) slot of an experiment.

    SHA-256 over the repr of the key tuple; independent of execution order
    and of the platform, so serial and parallel runs agree.
    """
    text = "batchstate:" + repr((int(master_seed),) + tuple(key))
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


def run_example1(rho_list=(0.1, 1.0, 10.0), N: int = 5, model: LinearModel | None = None):
    """Filter matrices of the scalar system for several weights.

    Returns a list of ``(rho, H)`` pairs, default A = C = 1 with N = 5.
    """
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    if model is None:
        model = LinearModel(A=[[1.0]], C=[1.0])
    return [(float(rho), filter_matrix(model, N, float(rho))) for rho in rho_list]


@dataclass(frozen=True)
class GridSpec:
    """Noise/horizon grid for the observer comparison.

    Measurement noise is slaved to the state noise: sigma_mu = 10 sigma_nu
    in every cell.  ``trials`` trajectories are simulated per cell.
    """

    sigma_nu_values: tuple = tuple(i / 10 for i in range(11))
    N_values: tuple = tuple(range(10, 101, 10))
    trials: int = 100
    master_seed: int = 0
    rho: float = 1.0
    sigma_mu_factor: float = 10.0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(s < 0 for s in self.sigma_nu_values):
            raise ValueError("sigma_nu values must be >= 0")


@dataclass(frozen=True)
class GridCell:
    sigma_nu: float
    N: int
    mean_err: dict      # method -> mean relative error over ok trials
    std_err: dict       # method -> standard deviation
    trials_ok: dict     # method -> number of trials that produced an estimate


@dataclass(frozen=True)
class GridReport:
    spec: GridSpec
    cells: list = field(default_factory=list)

    def cell(self, sigma_nu: float, N: int) -> GridCell:
        for c in self.cells:
            if c.N == N and abs(c.sigma_nu - sigma_nu) < 1e-12:
                return c
        raise KeyError(f"no cell for sigma_nu={sigma_nu}, N={N}")


def run_example2(grid: GridSpec, model: LinearModel | None = None,
                 x1=None) -> GridReport:
    """Observer comparison grid on the 10-state companion benchmark.

    For every (sigma_nu, N) cell, ``grid.trials`` seeded trajectories are
    simulated and estimated three ways -- batch filter, full-window
    dead-beat, sliding dead-beat -- and per-method mean/std of the relative
    error are aggregated.  Estimator failures are counted per cell, never
    fatal.
    """
    if model is None:
        model = example2_model()
    if x1 is None:
        x1 = example2_x1() if model.n == 10 else np.ones(model.n)

    cells = []
    for i_n, N in enumerate(grid.N_values):
        # The normal system depends only on (model, rho, N): factor once per N.
        normal = NormalSystem(model, rho=grid.rho, N=int(N))
        for i_s, sigma_nu in enumerate(grid.sigma_nu_values):
            errs = {m: [] for m in METHODS}
            for trial in range(grid.trials):
                seed = derive_seed(grid.master_seed, i_s, i_n, trial)
                noise = NoiseSpec(sigma_nu=sigma_nu,
                                  sigma_mu=grid.sigma_mu_factor * sigma_nu,
                                  seed=seed)
                truth, ms = simulate(model, x1, noise, int(N))
                estimates = {}
                try:
                    estimates["batch"] = solve_estimate(normal, ms).xhat
                except (NotObservableOrIllConditioned, np.linalg.LinAlgError):
                    pass
                for name, observer in (("db", deadbeat_full), ("sdb", deadbeat_sliding)):
                    try:
                        estimates[name] = observer(model, ms)
                    except (NotObservableOrIllConditioned, np.linalg.LinAlgError):
                        pass
                for name, xhat in estimates.items():
                    errs[name].append(relative_error(xhat, truth))
            cells.append(GridCell(
                sigma_nu=float(sigma_nu), N=int(N),
                mean_err={m: float(np.mean(e)) if e else float("nan")
                          for m, e in errs.items()},
                std_err={m: float(np.std(e)) if e else float("nan")
                         for m, e in errs.items()},
                trials_ok={m: len(e) for m, e in errs.items()}))
    return GridReport(spec=grid, cells=cells)


@dataclass(frozen=True)
class Example3Trial:
    sigma_mu: float
    trial: int
    err_x: float
    err_theta: float
    iters: int
    failed: bool = False


@dataclass(frozen=True)
class Example3Report:
    sigma_values: tuple
    trials: int
    N: int
    config: FitConfig
    master_seed: int
    rows: list = field(default_factory=list)

    def summary(self):
        """Per-sigma (mean err_x, mean err_theta, ok, failed) over clean trials."""
        out = []
        for sigma in self.sigma_values:
            ok = [r for r in self.rows if r.sigma_mu == sigma and not r.failed]
            failed = sum(1 for r in self.rows if r.sigma_mu == sigma and r.failed)
            mean_x = float(np.mean([r.err_x for r in ok])) if ok else float("nan")
            mean_th = float(np.mean([r.err_theta for r in ok])) if ok else float("nan")
            out.append({"sigma_mu": sigma, "mean_err_x": mean_x,
                        "mean_err_theta": mean_th, "trials_ok": len(ok),
                        "trials_failed": failed})
        return out


def _nondivergent_initial(params: HenonParams, rng: np.random.Generator,
                          N: int) -> np.ndarray:
    """Rejection-sample x1 ~ U[0,1]^2 whose noiseless run stays in bounds."""
    for _ in range(HENON_MAX_ATTEMPTS):
        x1 = rng.uniform(0.0, 1.0, size=2)
        try:
            states, _ = henon_simulate(params, x1, 0.0, N)
        except DivergenceError:
            continue
        if np.abs(states[:, 0]).max() <= HENON_KEEP_BOUND:
            return x1
    raise RuntimeError("could not sample a non-divergent initial condition")


def run_example3(sigma_list=(0.0, 0.1, 0.2, 0.5, 1.0), trials: int = 10,
                 config: FitConfig = FitConfig(), N: int = 100,
                 master_seed: int = 0,
                 params: HenonParams = HenonParams()) -> Example3Report:
    """Noise sweep of the Henon reconstruction.

    Each trial draws a fresh non-divergent initial condition, simulates noisy
    measurements, fits the augmented state, and records the relative errors
    in the first-state sequence and the mean coefficient vector.  Diverged
    fits are recorded as failures and excluded from the means, never silently
    dropped.
    """
    rows = []
    for i_s, sigma in enumerate(sigma_list):
        for trial in range(trials):
            rng = np.random.default_rng(derive_seed(master_seed, i_s, trial, "init_cond"))
            x1 = _nondivergent_initial(params, rng, N)
            noise_seed = derive_seed(master_seed, i_s, trial, "meas_noise")
            states, y = henon_simulate(params, x1, float(sigma), N, seed=noise_seed)
            trial_config = replace(config,
                                   init_seed=derive_seed(master_seed, i_s, trial, "theta_init"))
            try:
                est = fit(y, trial_config)
            except FitDivergedError:
                rows.append(Example3Trial(sigma_mu=float(sigma), trial=trial,
                                          err_x=float("nan"), err_theta=float("nan"),
                                          iters=0, failed=True))
                continue
            summ = theta_summary(est, true_states=states[:, 0])
            rows.append(Example3Trial(sigma_mu=float(sigma), trial=trial,
                                      err_x=summ.err_x, err_theta=summ.err_theta,
                                      iters=est.iterations_used))
    return Example3Report(sigma_values=tuple(float(s) for s in sigma_list),
                          trials=trials, N=N, config=config,
                          master_seed=master_seed, rows=rows)


def grid_report_to_csv(report: GridReport, path):
    with open(path, "w") as fh:
        fh.write("sigma_nu,N,method,mean_err,std_err,trials_ok\n")
        for cell in report.cells:
            for m in METHODS:
                fh.write(f"{FLOAT_FMT % cell.sigma_nu},{cell.N},{m},"
                         f"{FLOAT_FMT % cell.mean_err[m]},"
                         f"{FLOAT_FMT % cell.std_err[m]},{cell.trials_ok[m]}\n")


def grid_report_to_json(report: GridReport) -> str:
    spec = report.spec
    return json.dumps({
        "experiment": "example2_grid",
        "config": {"sigma_nu_values": list(spec.sigma_nu_values),
                   "N_values": [int(v) for v in spec.N_values],
                   "trials": spec.trials, "master_seed": spec.master_seed,
                   "rho": spec.rho, "sigma_mu_factor": spec.sigma_mu_factor},
        "cells": [{"sigma_nu": c.sigma_nu, "N": c.N, "mean_err": c.mean_err,
                   "std_err": c.std_err, "trials_ok": c.trials_ok}
                  for c in report.cells],
    })


def grid_report_to_matrix_txt(report: GridReport, method: str, path):
    """Plot-ready matrix of mean errors: rows follow sigma_nu, columns N.

    Plain whitespace-separated numbers (gnuplot ``matrix`` format); the first
    row/column order matches the grid spec's value lists.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    spec = report.spec
    with open(path, "w") as fh:
        for sigma in spec.sigma_nu_values:
            row = [report.cell(sigma, N).mean_err[method] for N in spec.N_values]
            fh.write(" ".join(FLOAT_FMT % v for v in row) + "\n")


def example3_report_to_csv(report: Example3Report, path):
    with open(path, "w") as fh:
        fh.write("sigma_mu,trial,err_X,err_Theta,iters\n")
        for r in report.rows:
            fh.write(f"{FLOAT_FMT % r.sigma_mu},{r.trial},{FLOAT_FMT % r.err_x},"
                     f"{FLOAT_FMT % r.err_theta},{r.iters}\n")


def example3_report_to_json(report: Example3Report) -> str:
    return json.dumps({
        "experiment": "example3_table",
        "config": {"sigma_values": list(report.sigma_values),
                   "trials": report.trials, "N": report.N,
                   "master_seed": report.master_seed,
                   "fit": report.config.to_dict()},
        "summary": report.summary(),
    })


def example1_to_files(pairs, out_prefix: str):
    """One CSV per weight: ``<prefix>_rho<value>.csv`` in matrix layout."""
    paths = []
    for rho, H in pairs:
        path = f"{out_prefix}_rho{rho:g}.csv"
        filter_matrix_to_csv(H, path)
        paths.append(path)
    return paths
