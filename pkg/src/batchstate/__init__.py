"""Batch trajectory and parameter estimation for noisy dynamical systems.

Estimates entire state trajectories (and, in the nonlinear case, per-step
parameter trajectories) from a finite window of scalar measurements, instead
of just an initial condition.  Linear models get a closed-form solve through
a block-tridiagonal normal system; the quadratic autoregressive model class
is fitted by proximal gradient descent.  Dead-beat observers are included as
baselines, together with seeded Monte Carlo harnesses for the three standard
experiments.
"""

from ._kernels import USING_COMPILED
from .errors import (DimensionMismatchError, DivergenceError, FitDivergedError,
                     NotObservableOrIllConditioned)
from .estimator import (EstimateReport, ExpectedLossReport, NormalSystem,
                        StackedDynamics, StackedOutput, assemble_normal,
                        build_stacked, expected_loss_report, filter_matrix,
                        loss, solve_estimate)
from .model import (LinearModel, MeasurementSeries, NoiseSpec, Trajectory,
                    companion_from_angles, example2_model, example2_x1,
                    observability_rank, simulate)
from .nonlinear import (AugmentedEstimate, FitConfig, HenonParams,
                        ThetaSummary, augmented_loss, fit, henon_simulate,
                        library_predict, loss_gradient, theta_summary)
from .observers import deadbeat_full, deadbeat_sliding, relative_error

__version__ = "0.1.0"

__all__ = [
    "USING_COMPILED",
    "DimensionMismatchError", "DivergenceError", "FitDivergedError",
    "NotObservableOrIllConditioned",
    "LinearModel", "NoiseSpec", "Trajectory", "MeasurementSeries",
    "companion_from_angles", "example2_model", "example2_x1", "simulate",
    "observability_rank",
    "StackedDynamics", "StackedOutput", "NormalSystem", "EstimateReport",
    "ExpectedLossReport", "build_stacked", "assemble_normal",
    "solve_estimate", "loss", "filter_matrix", "expected_loss_report",
    "deadbeat_full", "deadbeat_sliding", "relative_error",
    "HenonParams", "FitConfig", "AugmentedEstimate", "ThetaSummary",
    "henon_simulate", "library_predict", "augmented_loss", "loss_gradient",
    "fit", "theta_summary",
    "__version__",
]
