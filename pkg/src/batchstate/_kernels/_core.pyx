# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: block-tridiagonal Cholesky and the proximal fit loop.

Mirrors ``_pure.py`` function for function; keep the two in sync.
"""

import numpy as np

from libc.math cimport fabs, isfinite, sqrt

cdef int _PLATEAU = 0
cdef int _MAX_ITERS = 1
cdef int _DIVERGED = 2
cdef int _STALLED = 3

FIT_PLATEAU = _PLATEAU
FIT_MAX_ITERS = _MAX_ITERS
FIT_DIVERGED = _DIVERGED
FIT_STALLED = _STALLED

cdef double ACCEPT_TOL = 1e-9


cdef int _cholesky(double[:, ::1] S, double[:, :, ::1] Ld, Py_ssize_t t,
                   Py_ssize_t n) noexcept nogil:
    """Lower Cholesky of S into Ld[t]; returns 1 when S is not SPD."""
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(n):
        s = S[j, j]
        for k in range(j):
            s -= Ld[t, j, k] * Ld[t, j, k]
        if not (s > 0.0) or not isfinite(s):
            return 1
        Ld[t, j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = S[i, j]
            for k in range(j):
                s -= Ld[t, i, k] * Ld[t, j, k]
            Ld[t, i, j] = s / Ld[t, j, j]
    return 0


def bt_factor(diag, low):
    """Blocked Cholesky of a symmetric block-tridiagonal SPD matrix.

    Same contract as ``_pure.bt_factor``: returns (Ld, Ll, pivots,
    fail_block) with fail_block == -1 on success.
    """
    cdef double[:, :, ::1] D = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[:, :, ::1] E = np.ascontiguousarray(
        np.asarray(low, dtype=np.float64).reshape(-1, D.shape[1], D.shape[2]))
    cdef Py_ssize_t N = D.shape[0]
    cdef Py_ssize_t n = D.shape[1]
    Ld_arr = np.zeros((N, n, n))
    Ll_arr = np.zeros((max(N - 1, 0), n, n))
    piv_arr = np.zeros((N, n))
    cdef double[:, :, ::1] Ld = Ld_arr
    cdef double[:, :, ::1] Ll = Ll_arr
    cdef double[:, ::1] piv = piv_arr
    S_arr = np.zeros((n, n))
    cdef double[:, ::1] S = S_arr
    cdef Py_ssize_t t, i, j, k
    cdef double s
    cdef int fail = -1

    with nogil:
        for t in range(N):
            if t == 0:
                for i in range(n):
                    for j in range(n):
                        S[i, j] = D[0, i, j]
            else:
                # Schur complement: diag[t] - M M^T with M = Ll[t-1]
                for i in range(n):
                    for j in range(n):
                        s = D[t, i, j]
                        for k in range(n):
                            s -= Ll[t - 1, i, k] * Ll[t - 1, j, k]
                        S[i, j] = s
            if _cholesky(S, Ld, t, n):
                fail = <int> t
                break
            for i in range(n):
                piv[t, i] = Ld[t, i, i]
            if t < N - 1:
                # M = E_t * Ld[t]^{-T}: forward substitution per row of E_t
                for i in range(n):
                    for j in range(n):
                        s = E[t, i, j]
                        for k in range(j):
                            s -= Ld[t, j, k] * Ll[t, i, k]
                        Ll[t, i, j] = s / Ld[t, j, j]
    return Ld_arr, Ll_arr, piv_arr, fail


def bt_solve(Ld, Ll, rhs):
    """Solve the factored block-tridiagonal system for one (N, n) RHS."""
    cdef double[:, :, ::1] L = np.ascontiguousarray(Ld, dtype=np.float64)
    cdef double[:, :, ::1] M = np.ascontiguousarray(
        np.asarray(Ll, dtype=np.float64).reshape(-1, L.shape[1], L.shape[2]))
    cdef double[:, ::1] b = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t N = L.shape[0]
    cdef Py_ssize_t n = L.shape[1]
    z_arr = np.empty((N, n))
    x_arr = np.empty((N, n))
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] x = x_arr
    cdef Py_ssize_t t, i, k
    cdef double s

    with nogil:
        for t in range(N):
            for i in range(n):
                s = b[t, i]
                if t > 0:
                    for k in range(n):
                        s -= M[t - 1, i, k] * z[t - 1, k]
                for k in range(i):
                    s -= L[t, i, k] * z[t, k]
                z[t, i] = s / L[t, i, i]
        for t in range(N - 1, -1, -1):
            for i in range(n - 1, -1, -1):
                s = z[t, i]
                if t < N - 1:
                    for k in range(n):
                        s -= M[t, k, i] * x[t + 1, k]
                for k in range(i + 1, n):
                    s -= L[t, k, i] * x[t, k]
                x[t, i] = s / L[t, i, i]
    return x_arr


cdef double _smooth_loss_grad(double[::1] yhat, double[:, ::1] theta,
                              double[::1] y, double rho,
                              double[::1] gy, double[:, ::1] gth) noexcept nogil:
    cdef Py_ssize_t N = yhat.shape[0]
    cdef Py_ssize_t s, j
    cdef double a, b, pred, r, fa, fb, m, d
    cdef double loss = 0.0
    for s in range(N):
        gy[s] = 0.0
        for j in range(6):
            gth[s, j] = 0.0
    for s in range(1, N - 1):
        a = yhat[s]
        b = yhat[s - 1]
        pred = (theta[s, 0] + theta[s, 1] * a + theta[s, 2] * b
                + theta[s, 3] * a * b + theta[s, 4] * a * a
                + theta[s, 5] * b * b)
        r = yhat[s + 1] - pred
        loss += r * r
        fa = theta[s, 1] + theta[s, 3] * b + 2.0 * theta[s, 4] * a
        fb = theta[s, 2] + theta[s, 3] * a + 2.0 * theta[s, 5] * b
        gy[s + 1] += 2.0 * r
        gy[s] -= 2.0 * r * fa
        gy[s - 1] -= 2.0 * r * fb
        gth[s, 0] -= 2.0 * r
        gth[s, 1] -= 2.0 * r * a
        gth[s, 2] -= 2.0 * r * b
        gth[s, 3] -= 2.0 * r * a * b
        gth[s, 4] -= 2.0 * r * a * a
        gth[s, 5] -= 2.0 * r * b * b
    for s in range(N):
        m = y[s] - yhat[s]
        loss += rho * m * m
        gy[s] -= 2.0 * rho * m
    for s in range(N - 1):
        for j in range(6):
            d = theta[s + 1, j] - theta[s, j]
            loss += d * d
            gth[s + 1, j] += 2.0 * d
            gth[s, j] -= 2.0 * d
    return loss


cdef double _smooth_loss(double[::1] yhat, double[:, ::1] theta,
                         double[::1] y, double rho) noexcept nogil:
    cdef Py_ssize_t N = yhat.shape[0]
    cdef Py_ssize_t s, j
    cdef double a, b, pred, r, m, d
    cdef double loss = 0.0
    for s in range(1, N - 1):
        a = yhat[s]
        b = yhat[s - 1]
        pred = (theta[s, 0] + theta[s, 1] * a + theta[s, 2] * b
                + theta[s, 3] * a * b + theta[s, 4] * a * a
                + theta[s, 5] * b * b)
        r = yhat[s + 1] - pred
        loss += r * r
    for s in range(N):
        m = y[s] - yhat[s]
        loss += rho * m * m
    for s in range(N - 1):
        for j in range(6):
            d = theta[s + 1, j] - theta[s, j]
            loss += d * d
    return loss


cdef double _full_loss(double[::1] yhat, double[:, ::1] theta,
                       double[::1] y, double rho, double lam) noexcept nogil:
    cdef Py_ssize_t N = yhat.shape[0]
    cdef Py_ssize_t s, j
    cdef double l1 = 0.0
    for s in range(N):
        for j in range(6):
            l1 += fabs(theta[s, j])
    return _smooth_loss(yhat, theta, y, rho) + lam * l1


def henon_smooth_loss_grad(yhat, theta, y, rho):
    """Smooth objective value and exact gradient; see ``_pure``."""
    cdef double[::1] yv = np.ascontiguousarray(yhat, dtype=np.float64)
    cdef double[:, ::1] tv = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(y, dtype=np.float64)
    gy_arr = np.empty(yv.shape[0])
    gth_arr = np.empty((tv.shape[0], 6))
    cdef double[::1] gy = gy_arr
    cdef double[:, ::1] gth = gth_arr
    cdef double loss = _smooth_loss_grad(yv, tv, mv, rho, gy, gth)
    return loss, gy_arr, gth_arr


def henon_smooth_loss(yhat, theta, y, rho):
    cdef double[::1] yv = np.ascontiguousarray(yhat, dtype=np.float64)
    cdef double[:, ::1] tv = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(y, dtype=np.float64)
    return _smooth_loss(yv, tv, mv, rho)


def henon_full_loss(yhat, theta, y, rho, lam):
    cdef double[::1] yv = np.ascontiguousarray(yhat, dtype=np.float64)
    cdef double[:, ::1] tv = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(y, dtype=np.float64)
    return _full_loss(yv, tv, mv, rho, lam)


cdef inline double _shrink(double v, double t) noexcept nogil:
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


def henon_fit(y, yhat0, theta0, double rho, double lam, double eta,
              Py_ssize_t max_iters, double rel_tol, Py_ssize_t plateau_iters,
              double divergence_factor, bint backtrack):
    """Proximal gradient descent loop; same contract as ``_pure.henon_fit``."""
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t N = yv.shape[0]

    yhat_arr = np.array(yhat0, dtype=np.float64)
    theta_arr = np.array(theta0, dtype=np.float64)
    best_yhat_arr = yhat_arr.copy()
    best_theta_arr = theta_arr.copy()
    hist_arr = np.empty(max_iters + 1)
    gy_arr = np.empty(N)
    gth_arr = np.empty((N, 6))
    ynew_arr = np.empty(N)
    tnew_arr = np.empty((N, 6))

    cdef double[::1] yhat = yhat_arr
    cdef double[:, ::1] theta = theta_arr
    cdef double[::1] best_y = best_yhat_arr
    cdef double[:, ::1] best_t = best_theta_arr
    cdef double[::1] hist = hist_arr
    cdef double[::1] gy = gy_arr
    cdef double[:, ::1] gth = gth_arr
    cdef double[::1] ynew = ynew_arr
    cdef double[:, ::1] tnew = tnew_arr

    cdef double loss, loss_new, loss_init, best_loss, step, floor
    cdef Py_ssize_t it, s, j, halving, plateau = 0, iters = 0
    cdef int status = _MAX_ITERS
    cdef bint accepted

    loss = _full_loss(yhat, theta, yv, rho, lam)
    hist[0] = loss
    loss_init = loss
    best_loss = loss
    floor = loss_init if loss_init > 1e-300 else 1e-300

    with nogil:
        for it in range(max_iters):
            _smooth_loss_grad(yhat, theta, yv, rho, gy, gth)
            step = eta
            accepted = False
            for halving in range(61):
                for s in range(N):
                    ynew[s] = yhat[s] - step * gy[s]
                    for j in range(6):
                        tnew[s, j] = _shrink(theta[s, j] - step * gth[s, j],
                                             step * lam)
                loss_new = _full_loss(ynew, tnew, yv, rho, lam)
                if not backtrack:
                    accepted = True
                    break
                if isfinite(loss_new) and loss_new <= loss + ACCEPT_TOL * (1.0 + fabs(loss)):
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                status = _STALLED
                break

            for s in range(N):
                yhat[s] = ynew[s]
                for j in range(6):
                    theta[s, j] = tnew[s, j]
            iters += 1
            hist[iters] = loss_new
            if not isfinite(loss_new) or loss_new > divergence_factor * floor:
                status = _DIVERGED
                break
            if loss_new < best_loss:
                best_loss = loss_new
                for s in range(N):
                    best_y[s] = yhat[s]
                    for j in range(6):
                        best_t[s, j] = theta[s, j]
            if fabs(loss_new - loss) <= rel_tol * max(fabs(loss), 1e-300):
                plateau += 1
                if plateau >= plateau_iters:
                    loss = loss_new
                    status = _PLATEAU
                    break
            else:
                plateau = 0
            loss = loss_new

    return best_yhat_arr, best_theta_arr, hist_arr[:iters + 1].copy(), iters, status
