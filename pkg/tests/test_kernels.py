"""Parity and correctness of the hot kernels, pure vs compiled."""

import numpy as np
import pytest

from batchstate._kernels import _pure
from batchstate.estimator import NormalSystem
from batchstate.model import example2_model
from batchstate.nonlinear import HenonParams, henon_simulate

try:
    from batchstate._kernels import _core
    IMPLS = [_pure, _core]
except ImportError:
    _core = None
    IMPLS = [_pure]

needs_core = pytest.mark.skipif(_core is None, reason="compiled kernels not built")


def _random_spd_blocks(rng, N, n):
    """Well-conditioned symmetric block-tridiagonal SPD test matrix."""
    dense = rng.standard_normal((N * n, N * n)) * 0.3
    dense = dense @ dense.T + (N * n) * np.eye(N * n)
    diag = np.empty((N, n, n))
    low = np.empty((N - 1, n, n))
    full = np.zeros_like(dense)
    for t in range(N):
        diag[t] = dense[t * n:(t + 1) * n, t * n:(t + 1) * n]
        full[t * n:(t + 1) * n, t * n:(t + 1) * n] = diag[t]
    for t in range(N - 1):
        low[t] = dense[(t + 1) * n:(t + 2) * n, t * n:(t + 1) * n]
        full[(t + 1) * n:(t + 2) * n, t * n:(t + 1) * n] = low[t]
        full[t * n:(t + 1) * n, (t + 1) * n:(t + 2) * n] = low[t].T
    return diag, low, full


@pytest.mark.parametrize("impl", IMPLS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
class TestBlockTridiagonal:
    def test_factor_solve_against_dense(self, impl, rng):
        for trial in range(5):
            N = int(rng.integers(1, 12))
            n = int(rng.integers(1, 5))
            diag, low, full = _random_spd_blocks(rng, N, n)
            Ld, Ll, pivots, fail = impl.bt_factor(diag, low)
            assert fail == -1
            assert np.all(pivots > 0)
            rhs = rng.standard_normal((N, n))
            x = impl.bt_solve(Ld, Ll, rhs)
            want = np.linalg.solve(full, rhs.reshape(-1)).reshape(N, n)
            assert np.allclose(x, want, rtol=1e-11, atol=1e-12)

    def test_factor_reports_failure_block(self, impl):
        # indefinite in the second block
        diag = np.array([[[4.0]], [[-1.0]]])
        low = np.array([[[0.0]]])
        *_, fail = impl.bt_factor(diag, low)
        assert fail == 1

    def test_single_block(self, impl, rng):
        diag = np.array([[[2.0, 0.5], [0.5, 3.0]]])
        low = np.empty((0, 2, 2))
        Ld, Ll, _, fail = impl.bt_factor(diag, low)
        assert fail == -1
        rhs = rng.standard_normal((1, 2))
        x = impl.bt_solve(Ld, Ll, rhs)
        assert np.allclose(x[0], np.linalg.solve(diag[0], rhs[0]))


@needs_core
class TestParity:
    def test_factor_and_solve_agree(self, rng):
        diag, low, _ = _random_spd_blocks(rng, 9, 3)
        Ld_p, Ll_p, piv_p, f_p = _pure.bt_factor(diag, low)
        Ld_c, Ll_c, piv_c, f_c = _core.bt_factor(diag, low)
        assert f_p == f_c == -1
        assert np.allclose(Ld_p, Ld_c, rtol=1e-13, atol=1e-13)
        assert np.allclose(Ll_p, Ll_c, rtol=1e-13, atol=1e-13)
        assert np.allclose(piv_p, piv_c, rtol=1e-13)
        rhs = rng.standard_normal((9, 3))
        assert np.allclose(_pure.bt_solve(Ld_p, Ll_p, rhs),
                           _core.bt_solve(Ld_c, Ll_c, rhs),
                           rtol=1e-12, atol=1e-13)

    def test_gradient_agrees(self, rng):
        _, y = henon_simulate(HenonParams(), (0.1, 0.1), 0.5, 64, seed=5)
        yh = rng.standard_normal(64)
        th = rng.standard_normal((64, 6))
        lp, gyp, gthp = _pure.henon_smooth_loss_grad(yh, th, y, 0.1)
        lc, gyc, gthc = _core.henon_smooth_loss_grad(yh, th, y, 0.1)
        assert lp == pytest.approx(lc, rel=1e-13)
        assert np.allclose(gyp, gyc, rtol=1e-12, atol=1e-12)
        assert np.allclose(gthp, gthc, rtol=1e-12, atol=1e-12)
        assert _pure.henon_full_loss(yh, th, y, 0.1, 0.3) == pytest.approx(
            _core.henon_full_loss(yh, th, y, 0.1, 0.3), rel=1e-13)

    def test_short_fit_agrees(self, rng):
        _, y = henon_simulate(HenonParams(), (0.2, 0.1), 0.2, 40, seed=9)
        yhat0 = y.copy()
        theta0 = 0.01 * rng.standard_normal((40, 6))
        args = (y, yhat0, theta0, 0.1, 0.001, 0.05, 50, 1e-9, 50, 1e6, True)
        yp, tp, hp, ip, sp = _pure.henon_fit(*args)
        yc, tc, hc, ic, sc = _core.henon_fit(*args)
        assert (ip, sp) == (ic, sc)
        assert np.allclose(hp, hc, rtol=1e-9)
        assert np.allclose(yp, yc, rtol=1e-8, atol=1e-10)
        assert np.allclose(tp, tc, rtol=1e-8, atol=1e-10)

    def test_converged_fit_agrees_on_metrics(self, rng):
        # fp differences amplify over many iterations, so compare the fits
        # at the level of the quantities that matter
        _, y = henon_simulate(HenonParams(), (0.2, 0.1), 0.2, 50, seed=10)
        yhat0 = y.copy()
        theta0 = 0.01 * rng.standard_normal((50, 6))
        args = (y, yhat0, theta0, 0.1, 0.001, 0.05, 5000, 1e-9, 50, 1e6, True)
        yp, tp, hp, *_ = _pure.henon_fit(*args)
        yc, tc, hc, *_ = _core.henon_fit(*args)
        assert hp[-1] == pytest.approx(hc[-1], rel=1e-2)
        assert np.allclose(tp.mean(axis=0), tc.mean(axis=0), atol=5e-3)
        assert np.allclose(yp, yc, atol=5e-3)

    def test_example2_normal_system_end_to_end(self, rng):
        # with iterative refinement both kernel paths land on the same solution
        # even for the ill-conditioned marginally stable benchmark
        import batchstate._kernels as kernels
        model = example2_model()
        rhs = rng.standard_normal((40, 10))
        saved = (kernels.bt_factor, kernels.bt_solve)
        try:
            results = {}
            for name, mod in (("pure", _pure), ("core", _core)):
                kernels.bt_factor, kernels.bt_solve = mod.bt_factor, mod.bt_solve
                ns = NormalSystem(model, rho=1.0, N=40)
                results[name] = ns.solve(rhs)
        finally:
            kernels.bt_factor, kernels.bt_solve = saved
        scale = np.abs(results["pure"]).max()
        assert np.allclose(results["pure"], results["core"],
                           rtol=1e-9, atol=1e-9 * scale)


class TestSoftThreshold:
    def test_exact_zeros_below_threshold(self):
        x = np.array([-3e-5, 2e-5, 0.5, -0.5, 5e-5])
        out = _pure._soft_threshold(x, 5e-5)
        assert out[0] == 0.0 and out[1] == 0.0 and out[4] == 0.0
        assert out[2] == pytest.approx(0.5 - 5e-5)
        assert out[3] == pytest.approx(-0.5 + 5e-5)

    @needs_core
    def test_fit_step_zeroes_small_coefficients(self):
        # one proximal step on flat data must snap tiny coefficients to 0.0
        N = 5
        y = np.zeros(N)
        theta0 = np.full((N, 6), 1e-5)
        for impl in IMPLS:
            _, theta, _, iters, _ = impl.henon_fit(
                y, y.copy(), theta0, 0.1, 0.001, 0.05, 1, 1e-9, 50, 1e6, True)
            assert iters == 1
            assert np.all(theta == 0.0)
