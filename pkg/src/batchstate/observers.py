"""Dead-beat observer baselines and the shared error metric.

Both observers invert the observability map by pseudoinverse: the full-window
variant recovers only the initial state from all N measurements and
propagates it forward; the sliding variant re-solves an n-measurement window
for every time step and extrapolates the tail where the window no longer
fits.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, NotObservableOrIllConditioned
from .model import LinearModel, MeasurementSeries, Trajectory, observability_matrix

__all__ = ["deadbeat_full", "deadbeat_sliding", "relative_error"]

# SVD cutoff for the observability-matrix pseudoinverse, relative to the
# largest singular value.
PINV_RCOND = 1e-10


def _pinv_checked(obs: np.ndarray, n: int) -> np.ndarray:
    svals = np.linalg.svd(obs, compute_uv=False)
    rank = int(np.count_nonzero(svals > PINV_RCOND * svals[0])) if svals[0] > 0 else 0
    if rank < n:
        raise NotObservableOrIllConditioned(
            0, f"observability matrix has rank {rank} < n={n}")
    return np.linalg.pinv(obs, rcond=PINV_RCOND)


def deadbeat_full(model: LinearModel, Y: MeasurementSeries) -> Trajectory:
    """Least-squares initial state from the whole window, then propagate.

    xhat_1 is the pseudoinverse of the N-step observability matrix applied to
    Y; the rest of the trajectory is xhat_t = A^{t-1} xhat_1.
    """
    N = Y.horizon
    if N < model.n:
        raise DimensionMismatchError(
            f"need N >= n measurements, got N={N} < n={model.n}")
    obs = observability_matrix(model, steps=N)
    x1 = _pinv_checked(obs, model.n) @ Y.y
    states = np.empty((N, model.n))
    states[0] = x1
    for t in range(N - 1):
        states[t + 1] = model.A @ states[t]
    return Trajectory(states)


def deadbeat_sliding(model: LinearModel, Y: MeasurementSeries) -> Trajectory:
    """Window-by-window dead-beat estimate.

    For t = 1..N-n+1 the estimate comes from the n measurements starting at
    t; the final n-1 steps, where no full window exists, are extrapolated by
    the dynamics alone.
    """
    N, n = Y.horizon, model.n
    if N < n:
        raise DimensionMismatchError(
            f"need N >= n measurements, got N={N} < n={n}")
    pinv = _pinv_checked(observability_matrix(model, steps=n), n)
    states = np.empty((N, n))
    for t in range(N - n + 1):
        states[t] = pinv @ Y.y[t:t + n]
    for t in range(N - n + 1, N):
        states[t] = model.A @ states[t - 1]
    return Trajectory(states)


def relative_error(xhat: Trajectory, x: Trajectory) -> float:
    """Stacked relative error ||Xhat - X|| / ||X||."""
    if xhat.states.shape != x.states.shape:
        raise DimensionMismatchError(
            f"shape mismatch: {xhat.states.shape} vs {x.states.shape}")
    denom = np.linalg.norm(x.stacked())
    if denom == 0.0:
        raise ValueError("reference trajectory has zero norm")
    return float(np.linalg.norm(xhat.stacked() - x.stacked()) / denom)
