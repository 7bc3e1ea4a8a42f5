# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled step kernels for the 1D and 2D negative Laplacian.

Explicit steps and the 1D tridiagonal solve are ordered exactly as in the
numpy fallback, so both backends agree bit for bit (built without FMA
contraction).  The 2D banded Cholesky solve uses a plain column-oriented
substitution and agrees with LAPACK to rounding.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef class Stepper:
    """One step of an explicit/implicit propagator with optional prox.

    explicit:  y = x - s * (A x - b)
    implicit:  y = (I + s A)^{-1} (x + s b)
    then, if tau > 0, the entrywise prox of tau * ||(-.)_+||_1.

    Implicit 1D steps take the LDL^T factors ``(d, e)``; implicit 2D steps the
    lower banded Cholesky factor ``band`` of shape ``(n + 1, n * n)``.
    """

    cdef readonly int dim
    cdef readonly int n
    cdef readonly Py_ssize_t N
    cdef readonly bint implicit
    cdef readonly bint has_b
    cdef readonly double s
    cdef readonly double c
    cdef readonly double tau
    cdef const double[::1] b
    cdef const double[::1] d
    cdef const double[::1] e
    cdef const double[:, ::1] lt   # band factor, transposed: lt[j, k] = L[j + k, j]

    def __init__(self, int dim, int n, bint implicit, double s, double inv_h2, b,
                 double tau, d=None, e=None, band=None):
        if dim not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        self.dim = dim
        self.n = n
        self.N = n if dim == 1 else n * n
        self.implicit = implicit
        self.s = s
        self.c = inv_h2
        self.tau = tau
        self.has_b = b is not None
        self.b = np.ascontiguousarray(b if b is not None else np.zeros(self.N), dtype=np.float64)
        self.d = np.zeros(1)
        self.e = np.zeros(1)
        self.lt = np.zeros((1, 1))
        if implicit and dim == 1:
            if d is None or e is None:
                raise ValueError("implicit 1D stepper needs LDL^T factors")
            self.d = np.ascontiguousarray(d, dtype=np.float64)
            self.e = np.ascontiguousarray(e, dtype=np.float64)
        elif implicit:
            if band is None:
                raise ValueError("implicit 2D stepper needs the banded Cholesky factor")
            self.lt = np.ascontiguousarray(np.asarray(band, dtype=np.float64).T)

    cdef inline void _explicit1(self, const double* x, double* y) noexcept nogil:
        cdef Py_ssize_t i, n = self.n
        cdef double t, s = self.s, c = self.c
        for i in range(n):
            t = 2.0 * x[i]
            if i > 0:
                t = t - x[i - 1]
            if i < n - 1:
                t = t - x[i + 1]
            t = c * t
            if self.has_b:
                y[i] = x[i] - s * (t - self.b[i])
            else:
                y[i] = x[i] - s * t

    cdef inline void _explicit2(self, const double* x, double* y) noexcept nogil:
        cdef Py_ssize_t i, j, k, n = self.n
        cdef double t, s = self.s, c = self.c
        for i in range(n):
            for j in range(n):
                k = i * n + j
                t = 4.0 * x[k]
                if i > 0:
                    t = t - x[k - n]
                if i < n - 1:
                    t = t - x[k + n]
                if j > 0:
                    t = t - x[k - 1]
                if j < n - 1:
                    t = t - x[k + 1]
                t = c * t
                if self.has_b:
                    y[k] = x[k] - s * (t - self.b[k])
                else:
                    y[k] = x[k] - s * t

    cdef inline void _solve1(self, double* y) noexcept nogil:
        # LAPACK dptts2 ordering
        cdef Py_ssize_t i, n = self.n
        for i in range(1, n):
            y[i] = y[i] - y[i - 1] * self.e[i - 1]
        y[n - 1] = y[n - 1] / self.d[n - 1]
        for i in range(n - 2, -1, -1):
            y[i] = y[i] / self.d[i] - y[i + 1] * self.e[i]

    cdef inline void _solve2(self, double* y) noexcept nogil:
        cdef Py_ssize_t j, k, kmax, N = self.N, bw = self.n
        cdef Py_ssize_t ld = self.lt.shape[1]
        cdef const double* L = &self.lt[0, 0]
        cdef const double* row
        cdef double t
        # L z = y
        for j in range(N):
            row = L + j * ld
            t = y[j] / row[0]
            y[j] = t
            kmax = bw if j + bw < N else N - 1 - j
            for k in range(1, kmax + 1):
                y[j + k] = y[j + k] - row[k] * t
        # L^T x = z
        for j in range(N - 1, -1, -1):
            row = L + j * ld
            t = y[j]
            kmax = bw if j + bw < N else N - 1 - j
            for k in range(1, kmax + 1):
                t = t - row[k] * y[j + k]
            y[j] = t / row[0]

    cdef inline void _step(self, const double* x, double* y) noexcept nogil:
        cdef Py_ssize_t i, N = self.N
        cdef double t, s = self.s, tau = self.tau
        if not self.implicit:
            if self.dim == 1:
                self._explicit1(x, y)
            else:
                self._explicit2(x, y)
        else:
            if self.has_b:
                for i in range(N):
                    y[i] = x[i] + s * self.b[i]
            else:
                for i in range(N):
                    y[i] = x[i]
            if self.dim == 1:
                self._solve1(y)
            else:
                self._solve2(y)
        if tau > 0.0:
            for i in range(N):
                t = y[i]
                if t > 0.0:
                    pass
                elif t + tau < 0.0:
                    y[i] = t + tau
                else:
                    y[i] = 0.0

    def march(self, double[:, ::1] U, cnp.intp_t[::1] starts, Py_ssize_t nsteps, G=None):
        """For each start c: U[c+j] = step(U[c+j-1]) (+ G[c+j]), j = 1..nsteps."""
        cdef const double[:, ::1] Gv
        cdef bint has_g = G is not None
        cdef Py_ssize_t k, j, i, row, N = self.N
        if U.shape[1] != N:
            raise ValueError("state width mismatch")
        if has_g:
            Gv = G
            if Gv.shape[0] != U.shape[0] or Gv.shape[1] != N:
                raise ValueError("forcing shape mismatch")
        else:
            Gv = U[:1]
        for k in range(starts.shape[0]):
            if starts[k] < 0 or starts[k] + nsteps > U.shape[0] - 1:
                raise IndexError("march runs past the trajectory")
        with nogil:
            for k in range(starts.shape[0]):
                for j in range(1, nsteps + 1):
                    row = starts[k] + j
                    self._step(&U[row - 1, 0], &U[row, 0])
                    if has_g:
                        for i in range(N):
                            U[row, i] = U[row, i] + Gv[row, i]

    def step_rows(self, const double[:, ::1] X, double[:, ::1] Y):
        """Y[k] = step(X[k]) for every row."""
        cdef Py_ssize_t k
        if X.shape[0] != Y.shape[0] or X.shape[1] != self.N or Y.shape[1] != self.N:
            raise ValueError("shape mismatch")
        with nogil:
            for k in range(X.shape[0]):
                self._step(&X[k, 0], &Y[k, 0])
