"""Independent reference implementations used by the tests.

Everything here is written from the mathematical definitions with dense
matrices and explicit loops, sharing no code with the package.
"""

from __future__ import annotations

import math

import numpy as np


def dense_laplacian(d: int, n: int, length: float) -> np.ndarray:
    """Negative Laplacian assembled entry by entry (Dirichlet, interior points)."""
    h = length / (n + 1)
    if d == 1:
        A = np.zeros((n, n))
        for i in range(n):
            A[i, i] = 2.0
            if i > 0:
                A[i, i - 1] = -1.0
            if i < n - 1:
                A[i, i + 1] = -1.0
        return A / h ** 2
    N = n * n
    A = np.zeros((N, N))
    for i in range(n):
        for j in range(n):
            k = i * n + j
            A[k, k] = 4.0
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < n and 0 <= jj < n:
                    A[k, ii * n + jj] = -1.0
    return A / h ** 2


def prox_scalar(v: float, tau: float) -> float:
    """argmin_x tau * max(-x, 0) + (x - v)^2 / 2, by cases."""
    if v > 0:
        return v
    if v < -tau:
        return v + tau
    return 0.0


def prox_vec(u, tau):
    return np.array([prox_scalar(float(x), tau) for x in np.ravel(u)]).reshape(np.shape(u))


def gd_dense(A, b, s, u):
    return u - s * (A @ u - b)


def prox_point_dense(A, b, s, u):
    return np.linalg.solve(np.eye(A.shape[0]) + s * A, u + s * b)


def prox_grad_dense(A, b, s, lam, u):
    return prox_vec(gd_dense(A, b, s, u), s * lam)


def alt_prox_dense(A, b, s, lam, u):
    return prox_vec(prox_point_dense(A, b, s, u), s * lam)


def gen_grad_dense(A, b, s, lam, u):
    g = A @ u - b
    if lam is None:
        return g
    return (u - prox_vec(u - s * g, s * lam)) / s


def sequential_dense(step, u0, tol, max_iter, gradnorm):
    """Run ``u <- step(u)`` until ``gradnorm(u) <= tol * gradnorm(u0)``; return (N_t, iterates)."""
    g0 = gradnorm(u0)
    us = [np.array(u0, dtype=float)]
    k = 0
    while gradnorm(us[-1]) > tol * g0 and k < max_iter:
        us.append(step(us[-1]))
        k += 1
    return k, np.array(us)


def all_at_once_dense(M: np.ndarray, nt: int) -> np.ndarray:
    """Block lower-bidiagonal matrix with I on the diagonal and -M below."""
    N = M.shape[0]
    A = np.zeros((N * (nt + 1), N * (nt + 1)))
    for i in range(nt + 1):
        A[i * N:(i + 1) * N, i * N:(i + 1) * N] = np.eye(N)
        if i > 0:
            A[i * N:(i + 1) * N, (i - 1) * N:i * N] = -M
    return A


def obstacle_minimizer_active_set(A: np.ndarray, p: np.ndarray, max_iter: int = 500):
    """Primal-dual active set for min 1/2 u'Au - p'u subject to u >= 0 (dense)."""
    n = p.size
    active = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        u = np.zeros(n)
        free = ~active
        if free.any():
            u[free] = np.linalg.solve(A[np.ix_(free, free)], p[free])
        mu = A @ u - p
        new = np.where(active, mu > 0, u < 0)
        if np.array_equal(new, active):
            return u
        active = new
    raise RuntimeError("active set did not settle")


def two_level_mgrit_dense(phi_f, phi_c, w0, nt, m, guess, iters):
    """Textbook two-level FAS MGRIT with FCF relaxation, point by point.

    Returns the list of fine trajectories after the initial FCF and after each
    subsequent iteration (coarse correction, F, FCF), and the C-point residual
    norms at those states.
    """
    U = [np.array(g, dtype=float) for g in guess]
    U[0] = np.array(w0, dtype=float)
    nc = nt // m

    def f_relax():
        for j in range(nc):
            for i in range(j * m + 1, (j + 1) * m):
                U[i] = phi_f(U[i - 1])

    def c_relax():
        for j in range(1, nc + 1):
            U[j * m] = phi_f(U[j * m - 1])

    def residual():
        r = [w0 - U[0]] + [phi_f(U[j * m - 1]) - U[j * m] for j in range(1, nc + 1)]
        return r, math.sqrt(sum(float(x @ x) for x in r))

    states, norms = [], []
    f_relax(); c_relax(); f_relax()
    r, rn = residual()
    states.append(np.array(U)); norms.append(rn)
    for _ in range(iters):
        v = [U[j * m].copy() for j in range(nc + 1)]
        g = [w0] + [r[j] + v[j] - phi_c(v[j - 1]) for j in range(1, nc + 1)]
        uc = [w0]
        for j in range(1, nc + 1):
            uc.append(phi_c(uc[-1]) + g[j])
        for j in range(nc + 1):
            U[j * m] = uc[j]
        f_relax()
        f_relax(); c_relax(); f_relax()
        r, rn = residual()
        states.append(np.array(U)); norms.append(rn)
    return states, norms


def s2_time_model(N_f, m, N_it, t_f, t_c, N_p):
    """Two-level wall-clock model: N_it (coarse sequential + 2 parallel fine sweeps)."""
    N_c = N_f / m
    t_serial = N_f * t_f
    t_par = N_it * (N_c * t_c + 2 * N_f * t_f / N_p)
    return t_serial / t_par


def s3_time_model(N_f, m, N_it, t_f, t_c, N_p):
    N_c, N_cc = N_f / m, N_f / m ** 2
    t_par = N_it * (N_cc * t_c + 3 * N_c * t_c / min(N_p, N_c / m) + 2 * N_f * t_f / N_p)
    return N_f * t_f / t_par
