"""Pure-Python (numpy) kernels.

Reference implementations of the hot loops; the compiled extension in
``_core.pyx`` mirrors these function for function.  Keep both in sync --
the parity tests compare them on random inputs.
"""

import numpy as np
from scipy.linalg import solve_triangular

# henon_fit status codes (shared with the compiled kernels)
FIT_PLATEAU = 0
FIT_MAX_ITERS = 1
FIT_DIVERGED = 2
FIT_STALLED = 3

# A trial step is accepted when it does not increase the objective by more
# than this relative tolerance.
ACCEPT_TOL = 1e-9


def bt_factor(diag, low):
    """Blocked Cholesky of a symmetric block-tridiagonal SPD matrix.

    ``diag`` is (N, n, n) with the diagonal blocks, ``low`` is (N-1, n, n)
    with the subdiagonal blocks.  Returns ``(Ld, Ll, pivots, fail_block)``
    where ``Ld[t]`` is the lower-triangular Cholesky factor of the t-th Schur
    complement, ``Ll[t]`` the subdiagonal factor block, and ``pivots`` the
    (N, n) diagonal entries of the factors.  ``fail_block`` is -1 on success,
    otherwise the block where positive definiteness was lost.
    """
    diag = np.asarray(diag, dtype=float)
    low = np.asarray(low, dtype=float)
    N, n, _ = diag.shape
    Ld = np.zeros_like(diag)
    Ll = np.zeros_like(low)
    pivots = np.zeros((N, n))
    S = diag[0]
    for t in range(N):
        if t > 0:
            M = Ll[t - 1]
            S = diag[t] - M @ M.T
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            return Ld, Ll, pivots, t
        if not np.all(np.isfinite(L)):
            return Ld, Ll, pivots, t
        Ld[t] = L
        pivots[t] = np.diag(L)
        if t < N - 1:
            # subdiagonal factor block M_t = E_t * L_t^{-T}
            Ll[t] = solve_triangular(L, low[t].T, lower=True).T
    return Ld, Ll, pivots, -1


def bt_solve(Ld, Ll, rhs):
    """Solve the factored block-tridiagonal system for one stacked RHS.

    ``rhs`` has shape (N, n); returns the solution with the same shape.
    """
    N, n, _ = Ld.shape
    rhs = np.asarray(rhs, dtype=float)
    z = np.empty_like(rhs)
    for t in range(N):
        b = rhs[t] if t == 0 else rhs[t] - Ll[t - 1] @ z[t - 1]
        z[t] = solve_triangular(Ld[t], b, lower=True)
    x = np.empty_like(rhs)
    for t in range(N - 1, -1, -1):
        b = z[t] if t == N - 1 else z[t] - Ll[t].T @ x[t + 1]
        x[t] = solve_triangular(Ld[t], b, lower=True, trans=1)
    return x


def _features(a, b):
    """Polynomial library values [1, a, b, a*b, a^2, b^2], vectorized."""
    one = np.ones_like(a)
    return np.stack([one, a, b, a * b, a * a, b * b], axis=-1)


def henon_smooth_loss_grad(yhat, theta, y, rho):
    """Smooth part of the augmented objective and its exact gradient.

    The smooth part is the one-step model residual sum over t = 2..N-1, the
    measurement misfit weighted by ``rho`` and the parameter-increment
    penalty; the l1 term is handled by the proximal step, not here.
    Returns ``(loss, grad_y, grad_theta)``.
    """
    yhat = np.asarray(yhat, dtype=float)
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    N = yhat.shape[0]

    a = yhat[1:-1]       # y_t        for residual index t = 2..N-1 (1-based)
    b = yhat[:-2]        # y_{t-1}
    target = yhat[2:]    # y_{t+1}
    th = theta[1:-1]
    pred = (th[:, 0] + th[:, 1] * a + th[:, 2] * b + th[:, 3] * a * b
            + th[:, 4] * a * a + th[:, 5] * b * b)
    r = target - pred
    meas = y - yhat
    dth = theta[1:] - theta[:-1]
    loss = float(r @ r + rho * (meas @ meas) + np.sum(dth * dth))

    # d pred / d a and d pred / d b
    fa = th[:, 1] + th[:, 3] * b + 2.0 * th[:, 4] * a
    fb = th[:, 2] + th[:, 3] * a + 2.0 * th[:, 5] * b

    gy = -2.0 * rho * meas
    gy[2:] += 2.0 * r
    gy[1:-1] += -2.0 * r * fa
    gy[:-2] += -2.0 * r * fb

    gth = np.zeros_like(theta)
    gth[1:-1] = -2.0 * r[:, None] * _features(a, b)
    gth[:-1] += -2.0 * dth
    gth[1:] += 2.0 * dth
    return loss, gy, gth


def henon_smooth_loss(yhat, theta, y, rho):
    """Smooth part of the augmented objective (no gradient)."""
    yhat = np.asarray(yhat, dtype=float)
    theta = np.asarray(theta, dtype=float)
    a = yhat[1:-1]
    b = yhat[:-2]
    th = theta[1:-1]
    pred = (th[:, 0] + th[:, 1] * a + th[:, 2] * b + th[:, 3] * a * b
            + th[:, 4] * a * a + th[:, 5] * b * b)
    r = yhat[2:] - pred
    meas = y - yhat
    dth = theta[1:] - theta[:-1]
    return float(r @ r + rho * (meas @ meas) + np.sum(dth * dth))


def henon_full_loss(yhat, theta, y, rho, lam):
    """Full augmented objective: smooth part plus lam * sum |theta|."""
    return henon_smooth_loss(yhat, theta, y, rho) + lam * float(np.abs(theta).sum())


def _soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def henon_fit(y, yhat0, theta0, rho, lam, eta, max_iters, rel_tol,
              plateau_iters, divergence_factor, backtrack):
    """Proximal gradient descent on the augmented objective.

    Each iteration takes a gradient step of size ``eta`` on the smooth part
    and soft-thresholds the parameter coordinates by ``eta * lam``; the
    output coordinates never shrink.  With ``backtrack`` true the step is
    halved until the objective does not increase by more than ACCEPT_TOL
    (relative), which makes the recorded losses monotone within tolerance.

    Returns ``(yhat, theta, loss_history, iters_used, status)`` where the
    history has one entry per accepted iterate plus the initial loss, and the
    returned iterate is the best one seen.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.array(yhat0, dtype=float)
    theta = np.array(theta0, dtype=float)

    loss = henon_full_loss(yhat, theta, y, rho, lam)
    history = [loss]
    loss_init = loss
    best_loss = loss
    best_yhat = yhat.copy()
    best_theta = theta.copy()
    plateau = 0
    status = FIT_MAX_ITERS
    iters = 0

    for _ in range(max_iters):
        _, gy, gth = henon_smooth_loss_grad(yhat, theta, y, rho)
        step = eta
        accepted = False
        for _halving in range(61):
            yhat_new = yhat - step * gy
            theta_new = _soft_threshold(theta - step * gth, step * lam)
            loss_new = henon_full_loss(yhat_new, theta_new, y, rho, lam)
            if not backtrack:
                accepted = True
                break
            if np.isfinite(loss_new) and loss_new <= loss + ACCEPT_TOL * (1.0 + abs(loss)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = FIT_STALLED
            break

        yhat, theta = yhat_new, theta_new
        iters += 1
        history.append(loss_new)
        if not np.isfinite(loss_new) or loss_new > divergence_factor * max(loss_init, 1e-300):
            status = FIT_DIVERGED
            break
        if loss_new < best_loss:
            best_loss = loss_new
            best_yhat = yhat.copy()
            best_theta = theta.copy()
        if abs(loss_new - loss) <= rel_tol * max(abs(loss), 1e-300):
            plateau += 1
            if plateau >= plateau_iters:
                loss = loss_new
                status = FIT_PLATEAU
                break
        else:
            plateau = 0
        loss = loss_new

    return best_yhat, best_theta, np.asarray(history), iters, status
