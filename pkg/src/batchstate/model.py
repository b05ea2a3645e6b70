"""Linear time-invariant models with additive Gaussian noise.

The model class is

    x_{t+1} = A x_t + nu_t        nu_t ~ N(0, sigma_nu^2 I)
    y_t     = C x_t + mu_t        mu_t ~ N(0, sigma_mu^2)

with a scalar output (C is a single row).  Trajectories are indexed
t = 1..N and stacked as X = (x_1^T ... x_N^T)^T.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

__all__ = [
    "LinearModel",
    "NoiseSpec",
    "Trajectory",
    "MeasurementSeries",
    "companion_from_angles",
    "example2_model",
    "example2_x1",
    "simulate",
    "observability_matrix",
    "observability_rank",
    "trajectory_to_csv",
    "trajectory_from_csv",
    "measurements_to_csv",
    "measurements_from_csv",
]

# Formatting used for every numeric CSV cell: 17 significant digits survive
# a float64 round trip.
FLOAT_FMT = "%.17g"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LinearModel:
    """State transition matrix ``A`` (n x n) and output row ``C`` (length n)."""

    A: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = _readonly(self.A)
        C = _readonly(np.ravel(self.C))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if A.shape[0] < 1:
            raise ValueError("state dimension must be >= 1")
        if C.shape[0] != A.shape[0]:
            raise DimensionMismatchError(
                f"C has {C.shape[0]} columns but A is {A.shape[0]}x{A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def to_json(self) -> str:
        return json.dumps({"A": self.A.tolist(), "C": self.C.tolist(),
                           "n": self.n})

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        doc = json.loads(text)
        model = cls(A=np.asarray(doc["A"], dtype=float),
                    C=np.asarray(doc["C"], dtype=float))
        if "n" in doc and int(doc["n"]) != model.n:
            raise DimensionMismatchError(
                f"declared n={doc['n']} but A is {model.n}x{model.n}")
        return model


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise levels and the seed that makes a simulation reproducible.

    ``sigma_nu`` applies i.i.d. to every state component, ``sigma_mu`` to the
    scalar measurement.  A zero level means exactly-zero noise: nothing is
    drawn from the generator for that term.
    """

    sigma_nu: float
    sigma_mu: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma_nu < 0 or self.sigma_mu < 0:
            raise ValueError("noise standard deviations must be >= 0")


@dataclass(frozen=True)
class Trajectory:
    """States x_1..x_N stored row-wise in an (N, n) array."""

    states: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if states.shape[0] < 1:
            raise ValueError("a trajectory needs at least one state")
        object.__setattr__(self, "states", _readonly(states))

    @property
    def horizon(self) -> int:
        return self.states.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def stacked(self) -> np.ndarray:
        """Column-stacked form X = (x_1^T ... x_N^T)^T of length n*N."""
        return self.states.reshape(-1)


@dataclass(frozen=True)
class MeasurementSeries:
    """Scalar outputs y_1..y_N; stacked form Y = (y_1 ... y_N)^T."""

    y: np.ndarray

    def __post_init__(self):
        y = np.ravel(np.asarray(self.y, dtype=float))
        if y.shape[0] < 1:
            raise ValueError("a measurement series needs at least one sample")
        object.__setattr__(self, "y", _readonly(y))

    @property
    def horizon(self) -> int:
        return self.y.shape[0]


def companion_from_angles(angles, magnitude: float = 1.0) -> LinearModel:
    """Companion-form model whose spectrum is magnitude * e^{+-i*angle_k}.

    Each angle contributes one complex conjugate pair, so the state dimension
    is ``2 * len(angles)``.  The companion convention here puts ones on the
    superdiagonal and the negated characteristic-polynomial coefficients in
    the last row; the output row is C = [1, 0, ..., 0].

    Angles must lie strictly inside (0, pi): an angle of 0 or pi would give a
    real root and break the conjugate-pair structure.  Repeated angles are
    allowed (repeated roots).
    """
    angles = np.ravel(np.asarray(angles, dtype=float))
    if angles.size == 0:
        raise ValueError("at least one angle is required")
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    if np.any(angles <= 0) or np.any(angles >= np.pi):
        raise ValueError("angles must lie strictly inside (0, pi)")

    # Characteristic polynomial: product of the real quadratics
    # z^2 - 2*magnitude*cos(angle)*z + magnitude^2, built by convolution.
    coeffs = np.array([1.0])
    for phi in angles:
        quad = np.array([1.0, -2.0 * magnitude * np.cos(phi), magnitude**2])
        coeffs = np.convolve(coeffs, quad)

    n = 2 * angles.size
    A = np.zeros((n, n))
    A[np.arange(n - 1), np.arange(1, n)] = 1.0
    # coeffs = [1, c_{n-1}, ..., c_0]; last row holds [-c_0, ..., -c_{n-1}]
    A[-1, :] = -coeffs[:0:-1]
    C = np.zeros(n)
    C[0] = 1.0
    return LinearModel(A=A, C=C)


def example2_model() -> LinearModel:
    """The 10-state marginally stable companion system used for benchmarking.

    Five complex conjugate eigenvalue pairs of magnitude 1 whose upper-half
    angles are pi/2 + pi/10 * i for i = 0..4.
    """
    angles = [np.pi / 2 + np.pi / 10 * i for i in range(5)]
    return companion_from_angles(angles, magnitude=1.0)


def example2_x1() -> np.ndarray:
    """Standard initial state for the benchmark system: the all-ones vector."""
    return np.ones(10)


def simulate(model: LinearModel, x1, noise: NoiseSpec, N: int):
    """Simulate ``N`` steps of the noisy model from initial state ``x1``.

    Returns ``(Trajectory, MeasurementSeries)``.  The generator is seeded
    from ``noise.seed`` and consumed in a fixed order -- per step t the state
    noise nu_t (skipped entirely when sigma_nu == 0) and then the measurement
    noise mu_t -- so identical inputs give bit-identical outputs.  nu is only
    drawn for t = 1..N-1, the transitions that actually occur.
    """
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    x1 = np.ravel(np.asarray(x1, dtype=float))
    if x1.shape[0] != model.n:
        raise DimensionMismatchError(
            f"x1 has dimension {x1.shape[0]} but the model has n={model.n}")

    n = model.n
    rng = np.random.default_rng(noise.seed)
    draw_nu = noise.sigma_nu > 0
    draw_mu = noise.sigma_mu > 0

    # Bulk draws in per-step order: (nu_t, mu_t) for t < N, then mu_N.
    if draw_nu and draw_mu:
        block = rng.standard_normal((N - 1) * (n + 1) + 1)
        steps = block[:-1].reshape(N - 1, n + 1) if N > 1 else block[:0].reshape(0, n + 1)
        nu = noise.sigma_nu * steps[:, :n]
        mu = np.empty(N)
        mu[:-1] = noise.sigma_mu * steps[:, n]
        mu[-1] = noise.sigma_mu * block[-1]
    elif draw_nu:
        nu = noise.sigma_nu * rng.standard_normal((N - 1, n))
        mu = np.zeros(N)
    elif draw_mu:
        nu = np.zeros((N - 1, n))
        mu = noise.sigma_mu * rng.standard_normal(N)
    else:
        nu = np.zeros((N - 1, n))
        mu = np.zeros(N)

    states = np.empty((N, n))
    states[0] = x1
    for t in range(N - 1):
        states[t + 1] = model.A @ states[t] + nu[t]
    y = states @ model.C + mu
    return Trajectory(states), MeasurementSeries(y)


def observability_matrix(model: LinearModel, steps: int | None = None) -> np.ndarray:
    """Stacked rows C, CA, ..., CA^{steps-1}; defaults to steps = n."""
    steps = model.n if steps is None else steps
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rows = np.empty((steps, model.n))
    row = model.C.copy()
    for k in range(steps):
        rows[k] = row
        row = row @ model.A
    return rows


def observability_rank(model: LinearModel, tol: float = 1e-10):
    """Rank of the n-step observability matrix via singular values.

    Returns ``(rank, observable)`` where singular values below
    ``tol * sigma_max`` do not count toward the rank.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    svals = np.linalg.svd(observability_matrix(model), compute_uv=False)
    if svals[0] == 0.0:
        return 0, False
    rank = int(np.count_nonzero(svals > tol * svals[0]))
    return rank, rank == model.n


def trajectory_to_csv(traj: Trajectory, path):
    with open(path, "w") as fh:
        cols = ",".join(f"x_{i + 1}" for i in range(traj.n))
        fh.write(f"t,{cols}\n")
        for t, row in enumerate(traj.states, start=1):
            vals = ",".join(FLOAT_FMT % v for v in row)
            fh.write(f"{t},{vals}\n")


def trajectory_from_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(data[:, 1:])


def measurements_to_csv(series: MeasurementSeries, path):
    with open(path, "w") as fh:
        fh.write("t,y\n")
        for t, v in enumerate(series.y, start=1):
            fh.write(f"{t},{FLOAT_FMT % v}\n")


def measurements_from_csv(path) -> MeasurementSeries:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return MeasurementSeries(data[:, 1])
