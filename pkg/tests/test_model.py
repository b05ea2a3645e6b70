import numpy as np
import pytest

from batchstate.errors import DimensionMismatchError
from batchstate.model import (LinearModel, MeasurementSeries, NoiseSpec,
                              Trajectory, companion_from_angles, example2_model,
                              example2_x1, measurements_from_csv,
                              measurements_to_csv, observability_rank, simulate,
                              trajectory_from_csv, trajectory_to_csv)


class TestLinearModel:
    def test_validation(self):
        with pytest.raises(ValueError):
            LinearModel(A=np.zeros((2, 3)), C=np.zeros(2))
        with pytest.raises(DimensionMismatchError):
            LinearModel(A=np.eye(2), C=np.zeros(3))

    def test_json_round_trip(self):
        model = companion_from_angles([0.4, 1.1], magnitude=0.9)
        back = LinearModel.from_json(model.to_json())
        assert np.array_equal(back.A, model.A)
        assert np.array_equal(back.C, model.C)

    def test_json_rejects_wrong_n(self):
        with pytest.raises(DimensionMismatchError):
            LinearModel.from_json('{"A": [[1.0]], "C": [1.0], "n": 2}')


class TestCompanionFromAngles:
    def test_single_right_angle(self):
        # char. poly z^2 + 1, i.e. rows [[0, 1], [-1, 0]]
        model = companion_from_angles([np.pi / 2], magnitude=1.0)
        assert np.allclose(model.A, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-15)
        assert np.array_equal(model.C, [1.0, 0.0])

    def test_magnitude_two(self):
        # (z - 2e^{i pi/3})(z - 2e^{-i pi/3}) = z^2 - 2z + 4
        model = companion_from_angles([np.pi / 3], magnitude=2.0)
        assert np.allclose(model.A[-1], [-4.0, 2.0], atol=1e-12)
        assert np.allclose(model.A[0], [0.0, 1.0])

    def test_benchmark_spectrum_on_unit_circle(self):
        eigs = np.linalg.eigvals(example2_model().A)
        assert eigs.shape == (10,)
        assert np.abs(np.abs(eigs) - 1.0).max() < 1e-10
        upper = np.sort(np.angle(eigs[eigs.imag > 0]))
        expected = np.sort([np.pi / 2 + np.pi / 10 * i for i in range(5)])
        assert np.allclose(upper, expected, atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("magnitude", [0.75, 1.0, 1.3])
    def test_spectrum_reproduction(self, seed, magnitude):
        # requested spectrum recovered to 1e-8 for n <= 12
        gen = np.random.default_rng(seed)
        k = gen.integers(1, 7)
        angles = np.sort(gen.uniform(0.05, np.pi - 0.05, size=k))
        model = companion_from_angles(angles, magnitude)
        assert model.n == 2 * k
        eigs = np.linalg.eigvals(model.A)
        got = np.sort_complex(eigs)
        want = np.sort_complex(np.concatenate(
            [magnitude * np.exp(1j * angles), magnitude * np.exp(-1j * angles)]))
        assert np.abs(got - want).max() < 1e-8

    def test_rejected_inputs(self):
        with pytest.raises(ValueError):
            companion_from_angles([])
        with pytest.raises(ValueError):
            companion_from_angles([0.0])
        with pytest.raises(ValueError):
            companion_from_angles([np.pi])
        with pytest.raises(ValueError):
            companion_from_angles([0.5], magnitude=0.0)

    def test_duplicate_angles_allowed(self):
        model = companion_from_angles([0.7, 0.7])
        eigs = np.linalg.eigvals(model.A)
        assert np.abs(np.abs(eigs) - 1.0).max() < 1e-8


class TestSimulate:
    def test_identity_dynamics(self):
        model = LinearModel(A=[[1.0]], C=[1.0])
        traj, ms = simulate(model, [1.0], NoiseSpec(0.0, 0.0, 0), 5)
        assert np.array_equal(traj.states, np.ones((5, 1)))
        assert np.array_equal(ms.y, np.ones(5))

    def test_rotation(self):
        model = LinearModel(A=[[0.0, 1.0], [-1.0, 0.0]], C=[1.0, 0.0])
        _, ms = simulate(model, [1.0, 0.0], NoiseSpec(0.0, 0.0, 0), 4)
        assert np.array_equal(ms.y, [1.0, 0.0, -1.0, 0.0])

    def test_deterministic_given_seed(self):
        model = example2_model()
        spec = NoiseSpec(0.3, 3.0, seed=42)
        t1, m1 = simulate(model, example2_x1(), spec, 30)
        t2, m2 = simulate(model, example2_x1(), spec, 30)
        assert np.array_equal(t1.states, t2.states)
        assert np.array_equal(m1.y, m2.y)

    def test_zero_noise_follows_dynamics_exactly(self):
        model = example2_model()
        traj, _ = simulate(model, example2_x1(), NoiseSpec(0.0, 0.0, 7), 40)
        for t in range(39):
            assert np.array_equal(traj.states[t + 1], model.A @ traj.states[t])

    def test_noise_moments(self):
        # empirical state-noise variance within 3% of sigma_nu^2 over >= 1e5 draws
        model = LinearModel(A=np.zeros((2, 2)), C=[1.0, 0.0])
        sigma = 0.7
        traj, _ = simulate(model, [0.0, 0.0], NoiseSpec(sigma, 0.0, 11), 50_001)
        nu = traj.states[1:]  # A = 0 so x_{t+1} is exactly nu_t
        assert nu.size == 100_000
        assert abs(nu.var() - sigma**2) < 0.03 * sigma**2

    def test_dimension_mismatch(self):
        model = LinearModel(A=np.eye(2), C=[1.0, 0.0])
        with pytest.raises(DimensionMismatchError):
            simulate(model, [1.0], NoiseSpec(0.0, 0.0, 0), 3)

    def test_bad_horizon(self):
        model = LinearModel(A=[[1.0]], C=[1.0])
        with pytest.raises(ValueError):
            simulate(model, [1.0], NoiseSpec(0.0, 0.0, 0), 0)

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(-1.0, 0.0, 0)


class TestObservabilityRank:
    def test_repeated_row_not_observable(self):
        rank, obs = observability_rank(LinearModel(A=np.eye(2), C=[1.0, 0.0]))
        assert (rank, obs) == (1, False)

    def test_rotation_observable(self):
        model = LinearModel(A=[[0.0, 1.0], [-1.0, 0.0]], C=[1.0, 0.0])
        assert observability_rank(model) == (2, True)

    def test_scalar(self):
        assert observability_rank(LinearModel(A=[[1.0]], C=[1.0])) == (1, True)

    def test_tol_rejected(self):
        with pytest.raises(ValueError):
            observability_rank(LinearModel(A=[[1.0]], C=[1.0]), tol=0.0)


class TestCsvIO:
    def test_trajectory_round_trip(self, tmp_path, rng):
        traj = Trajectory(rng.standard_normal((7, 3)))
        path = tmp_path / "x.csv"
        trajectory_to_csv(traj, path)
        header = path.read_text().splitlines()[0]
        assert header == "t,x_1,x_2,x_3"
        back = trajectory_from_csv(path)
        assert np.array_equal(back.states, traj.states)

    def test_measurements_round_trip(self, tmp_path, rng):
        ms = MeasurementSeries(rng.standard_normal(9))
        path = tmp_path / "y.csv"
        measurements_to_csv(ms, path)
        assert path.read_text().splitlines()[0] == "t,y"
        back = measurements_from_csv(path)
        assert np.array_equal(back.y, ms.y)
