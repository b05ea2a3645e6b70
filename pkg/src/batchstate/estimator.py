"""Closed-form batch trajectory estimation.

The estimate minimizes

    loss(Xhat) = sum_t ||xhat_{t+1} - A xhat_t||^2 + rho * sum_t (y_t - C xhat_t)^2

over the entire stacked trajectory.  Writing the stacked one-step dynamics
operator as ``Phi`` and the stacked output operator as ``Psi``, the unique
minimizer solves the symmetric positive-definite normal system

    (Phi^T Phi + rho * Psi^T Psi) Xhat = rho * Psi^T Y,

which is block tridiagonal and is factored once with a blocked Cholesky in
O(N n^3); explicit inversion is never formed.  The dense filter matrix that
maps Y directly to Xhat is materialized only on demand.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, NotObservableOrIllConditioned
from .model import FLOAT_FMT, LinearModel, MeasurementSeries, NoiseSpec, Trajectory

__all__ = [
    "StackedDynamics",
    "StackedOutput",
    "NormalSystem",
    "EstimateReport",
    "ExpectedLossReport",
    "build_stacked",
    "assemble_normal",
    "solve_estimate",
    "loss",
    "filter_matrix",
    "expected_loss_report",
    "filter_matrix_to_csv",
]

# Relative size of the smallest Cholesky pivot that triggers a conditioning
# warning, and the (smaller) floor below which the factorization is treated
# as failed even if every pivot came out positive.
PIVOT_WARN_RATIO = 1e-12
PIVOT_FAIL_RATIO = 1e-14


@dataclass(frozen=True)
class StackedDynamics:
    """One-step dynamics residual operator on stacked trajectories.

    Block row t of the dense form holds ``-A`` at block column t and the
    identity at block column t+1, so applying it to a stacked noiseless
    trajectory gives zero.  Shape: n(N-1) x nN.
    """

    A: np.ndarray
    N: int

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def apply(self, stacked: np.ndarray) -> np.ndarray:
        x = np.asarray(stacked, dtype=float).reshape(self.N, self.n)
        return (x[1:] - x[:-1] @ self.A.T).reshape(-1)

    def to_dense(self) -> np.ndarray:
        n, N = self.n, self.N
        out = np.zeros((n * (N - 1), n * N))
        eye = np.eye(n)
        for t in range(N - 1):
            out[t * n:(t + 1) * n, t * n:(t + 1) * n] = -self.A
            out[t * n:(t + 1) * n, (t + 1) * n:(t + 2) * n] = eye
        return out


@dataclass(frozen=True)
class StackedOutput:
    """Block-diagonal output operator: row t reads C x_t.  Shape: N x nN."""

    C: np.ndarray
    N: int

    @property
    def n(self) -> int:
        return self.C.shape[0]

    def apply(self, stacked: np.ndarray) -> np.ndarray:
        x = np.asarray(stacked, dtype=float).reshape(self.N, self.n)
        return x @ self.C

    def to_dense(self) -> np.ndarray:
        n, N = self.n, self.N
        out = np.zeros((N, n * N))
        for t in range(N):
            out[t, t * n:(t + 1) * n] = self.C
        return out


def build_stacked(model: LinearModel, N: int):
    """Stacked dynamics and output operators for horizon ``N``.

    ``N = 1`` is permitted and yields an empty dynamics operator.
    """
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    return StackedDynamics(A=model.A, N=N), StackedOutput(C=model.C, N=N)


class NormalSystem:
    """Factored normal operator of the batch least-squares problem.

    Stores the symmetric block-tridiagonal operator
    ``Phi^T Phi + rho * Psi^T Psi`` as N diagonal n x n blocks plus N-1
    subdiagonal blocks together with its blocked Cholesky factors.  Immutable
    after construction; concurrent solves against one factorization are safe.
    """

    def __init__(self, model: LinearModel, rho: float, N: int):
        if rho <= 0:
            raise ValueError("rho must be positive")
        if N < 1:
            raise ValueError("horizon N must be >= 1")
        self.model = model
        self.rho = float(rho)
        self.N = int(N)
        n = model.n

        # Assemble in extended precision: the double-rounded blocks feed the
        # factorization, the extended ones the refinement residuals.
        A_ld = model.A.astype(np.longdouble)
        C_ld = model.C.astype(np.longdouble)
        AtA = A_ld.T @ A_ld
        CtC = np.outer(C_ld, C_ld)
        eye = np.eye(n, dtype=np.longdouble)
        diag_ld = np.empty((N, n, n), dtype=np.longdouble)
        for t in range(N):
            block = rho * CtC
            if t < N - 1:
                block = block + AtA
            if t > 0:
                block = block + eye
            diag_ld[t] = block
        low_ld = np.broadcast_to(-A_ld, (max(N - 1, 0), n, n)).copy()

        self._diag_ld = diag_ld
        self._low_ld = low_ld
        self.diag_blocks = diag_ld.astype(float)
        self.low_blocks = low_ld.astype(float)

        Ld, Ll, pivots, fail = _kernels.bt_factor(self.diag_blocks, self.low_blocks)
        if fail >= 0:
            raise NotObservableOrIllConditioned(fail)
        piv_max = float(pivots.max())
        piv_min = float(pivots.min())
        if not np.isfinite(piv_max) or piv_min <= PIVOT_FAIL_RATIO * piv_max:
            raise NotObservableOrIllConditioned(
                int(np.argmin(pivots.min(axis=1))),
                f"smallest factor pivot {piv_min:.3e} is below "
                f"{PIVOT_FAIL_RATIO:.0e} of the largest ({piv_max:.3e})")
        if piv_min < PIVOT_WARN_RATIO * piv_max:
            warnings.warn(
                f"normal system is nearly singular: pivot ratio "
                f"{piv_min / piv_max:.3e}", RuntimeWarning, stacklevel=3)
        self._chol_diag = Ld
        self._chol_low = Ll
        self.pivot_min = piv_min
        self.pivot_max = piv_max

    @property
    def n(self) -> int:
        return self.model.n

    def matvec(self, x_blocks: np.ndarray) -> np.ndarray:
        """Apply the (unfactored) normal operator to (N, n) blocks."""
        x = np.asarray(x_blocks, dtype=float)
        out = np.einsum("tij,tj->ti", self.diag_blocks, x)
        if self.N > 1:
            out[1:] += np.einsum("tij,tj->ti", self.low_blocks, x[:-1])
            out[:-1] += np.einsum("tji,tj->ti", self.low_blocks, x[1:])
        return out

    def solve(self, rhs_blocks: np.ndarray, max_refine: int = 10) -> np.ndarray:
        """Solve against one stacked right-hand side given as (N, n) blocks.

        The marginally stable long-window systems this is used on can push
        the normal operator's condition number past 1e11, so the triangular
        solves are followed by iterative refinement with residuals
        accumulated in extended precision, until the corrections stop
        shrinking.
        """
        rhs = np.asarray(rhs_blocks, dtype=float)
        if rhs.shape != (self.N, self.n):
            raise DimensionMismatchError(
                f"rhs must have shape {(self.N, self.n)}, got {rhs.shape}")
        x = _kernels.bt_solve(self._chol_diag, self._chol_low, rhs)
        rhs_ld = rhs.astype(np.longdouble)
        prev_step = np.inf
        for _ in range(max_refine):
            residual = (rhs_ld - self._matvec_ld(x.astype(np.longdouble))).astype(float)
            dx = _kernels.bt_solve(self._chol_diag, self._chol_low, residual)
            x = x + dx
            step = float(np.linalg.norm(dx))
            if step <= 1e-16 * np.linalg.norm(x) or step >= 0.5 * prev_step:
                break
            prev_step = step
        return x

    def _matvec_ld(self, x: np.ndarray) -> np.ndarray:
        out = np.einsum("tij,tj->ti", self._diag_ld, x)
        if self.N > 1:
            out[1:] += np.einsum("tij,tj->ti", self._low_ld, x[:-1])
            out[:-1] += np.einsum("tji,tj->ti", self._low_ld, x[1:])
        return out

    def to_dense(self) -> np.ndarray:
        n, N = self.n, self.N
        out = np.zeros((n * N, n * N))
        for t in range(N):
            out[t * n:(t + 1) * n, t * n:(t + 1) * n] = self.diag_blocks[t]
        for t in range(N - 1):
            out[(t + 1) * n:(t + 2) * n, t * n:(t + 1) * n] = self.low_blocks[t]
            out[t * n:(t + 1) * n, (t + 1) * n:(t + 2) * n] = self.low_blocks[t].T
        return out


def assemble_normal(dynamics: StackedDynamics, output: StackedOutput,
                    rho: float) -> NormalSystem:
    """Assemble and factor the normal system for the given stacked operators."""
    if dynamics.N != output.N or dynamics.n != output.n:
        raise DimensionMismatchError("stacked operators disagree on (n, N)")
    model = LinearModel(A=dynamics.A, C=output.C)
    return NormalSystem(model, rho=rho, N=dynamics.N)


@dataclass(frozen=True)
class EstimateReport:
    """Batch estimate with its achieved loss and residual sequences."""

    xhat: Trajectory
    loss_value: float
    rho: float
    model_residuals: np.ndarray   # (N-1, n): xhat_{t+1} - A xhat_t
    output_residuals: np.ndarray  # (N,): y_t - C xhat_t

    def to_json(self) -> str:
        return json.dumps({
            "xhat": self.xhat.states.tolist(),
            "loss": self.loss_value,
            "rho": self.rho,
            "residual_norms": {
                "model": float(np.linalg.norm(self.model_residuals)),
                "output": float(np.linalg.norm(self.output_residuals)),
            },
        })


def solve_estimate(normal: NormalSystem, Y: MeasurementSeries) -> EstimateReport:
    """Closed-form loss minimizer for the measurements ``Y``.

    Solves the factored normal system against ``rho * Psi^T Y``; cost is
    O(N n^2) per call once the factorization exists.
    """
    if Y.horizon != normal.N:
        raise DimensionMismatchError(
            f"measurement series has horizon {Y.horizon}, normal system {normal.N}")
    rhs = normal.rho * Y.y[:, None] * normal.model.C[None, :]
    xhat = normal.solve(rhs)
    model_res = xhat[1:] - xhat[:-1] @ normal.model.A.T
    output_res = Y.y - xhat @ normal.model.C
    loss_value = float(np.sum(model_res * model_res)
                       + normal.rho * np.sum(output_res * output_res))
    return EstimateReport(xhat=Trajectory(xhat), loss_value=loss_value,
                          rho=normal.rho, model_residuals=model_res,
                          output_residuals=output_res)


def loss(xhat: Trajectory, Y: MeasurementSeries, model: LinearModel,
         rho: float) -> float:
    """The batch objective evaluated at an arbitrary trajectory."""
    if xhat.horizon != Y.horizon:
        raise DimensionMismatchError("trajectory and measurements disagree on N")
    if xhat.n != model.n:
        raise DimensionMismatchError("trajectory and model disagree on n")
    x = xhat.states
    model_res = x[1:] - x[:-1] @ model.A.T
    output_res = Y.y - x @ model.C
    return float(np.sum(model_res * model_res) + rho * np.sum(output_res * output_res))


def filter_matrix(model: LinearModel, N: int, rho: float) -> np.ndarray:
    """Dense nN x N map from stacked measurements to the stacked estimate.

    Column j is the estimate produced by the j-th unit measurement vector, so
    ``Xhat = H @ Y`` for every Y; row blocks act as per-time filters over the
    whole measurement window.
    """
    normal = NormalSystem(model, rho=rho, N=N)
    n = model.n
    H = np.empty((n * N, N))
    rhs = np.zeros((N, n))
    for j in range(N):
        rhs[j] = rho * model.C
        H[:, j] = normal.solve(rhs).reshape(-1)
        rhs[j] = 0.0
    return H


def filter_matrix_to_csv(H: np.ndarray, path):
    """Plain matrix CSV: one row per state-time index, one column per y_t."""
    with open(path, "w") as fh:
        for row in np.atleast_2d(H):
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


@dataclass(frozen=True)
class ExpectedLossReport:
    """Analytic noise-averaged losses and the optimality gap terms.

    ``e_loss_true`` is the expected objective at the true trajectory,
    ``e_loss_opt`` at the optimal estimate; the gap splits into a state-noise
    term and a measurement-noise term, both nonnegative.
    """

    e_loss_true: float
    e_loss_opt: float
    gap_state: float
    gap_meas: float

    @property
    def gap(self) -> float:
        return self.gap_state + self.gap_meas


def _noise_response_covariance(model: LinearModel, sigma_nu: float,
                               N: int) -> np.ndarray:
    """Stacked covariance of the zero-initial-condition noise response.

    Per-time covariances follow Sigma_{t+1} = A Sigma_t A^T + sigma_nu^2 I
    from Sigma_1 = 0; cross blocks are Cov(x_s, x_t) = Sigma_s (A^{t-s})^T
    for t >= s.
    """
    n = model.n
    sig = np.zeros((N, n, n))
    for t in range(N - 1):
        sig[t + 1] = model.A @ sig[t] @ model.A.T + sigma_nu**2 * np.eye(n)
    cov = np.zeros((n * N, n * N))
    for s in range(N):
        block = sig[s]
        cov[s * n:(s + 1) * n, s * n:(s + 1) * n] = block
        prop = block
        for t in range(s + 1, N):
            prop = prop @ model.A.T
            cov[s * n:(s + 1) * n, t * n:(t + 1) * n] = prop
            cov[t * n:(t + 1) * n, s * n:(s + 1) * n] = prop.T
    return cov


def expected_loss_report(model: LinearModel, noise: NoiseSpec, rho: float,
                         N: int) -> ExpectedLossReport:
    """Noise-averaged losses in closed form (no sampling).

    The expected objective at the truth is ``(N-1) n sigma_nu^2 +
    rho N sigma_mu^2``; the gap to the optimal estimate comes from the trace
    identities E[mu^T M mu] = sigma_mu^2 tr(M) and E[X^T Q X] = tr(Q Cov(X))
    applied to the stacked noise response.
    """
    n = model.n
    e_true = (N - 1) * n * noise.sigma_nu**2 + rho * N * noise.sigma_mu**2

    dynamics, output = build_stacked(model, N)
    normal = NormalSystem(model, rho=rho, N=N)
    Phi = dynamics.to_dense()
    Psi = output.to_dense()
    O_dense = normal.to_dense()

    PhiTPhi = Phi.T @ Phi
    G = np.linalg.solve(O_dense, PhiTPhi)          # O^{-1} Phi^T Phi
    cov = _noise_response_covariance(model, noise.sigma_nu, N)
    gap_state = float(np.trace(PhiTPhi @ G @ cov))
    # rho^2 * E[mu^T Psi O^{-1} Psi^T mu]
    gap_meas = float(rho**2 * noise.sigma_mu**2
                     * np.trace(Psi @ np.linalg.solve(O_dense, Psi.T)))
    return ExpectedLossReport(e_loss_true=e_true,
                              e_loss_opt=e_true - gap_state - gap_meas,
                              gap_state=gap_state, gap_meas=gap_meas)
