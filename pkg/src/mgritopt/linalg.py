"""Finite-difference negative Laplacians on uniform interior meshes.

The 1D operator is the tridiagonal ``(-1, 2, -1) / h**2`` stencil, the 2D
operator is the five-point stencil with unknowns ordered row-major over
``(i, j)``.  Both eliminate zero Dirichlet boundary values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.linalg.lapack import dpttrf, dpttrs


@dataclass(frozen=True)
class LaplacianOperator:
    """Banded negative Laplacian ``A_d`` with ``n`` interior points per direction."""

    d: int
    n: int
    h: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.n < 2:
            raise ValueError(f"need at least 2 interior points, got {self.n}")
        if not self.h > 0:
            raise ValueError(f"mesh spacing must be positive, got {self.h}")

    @property
    def N(self) -> int:
        return self.n ** self.d

    @property
    def inv_h2(self) -> float:
        return 1.0 / (self.h * self.h)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Return ``A v``; ``v`` may carry leading batch dimensions."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.N:
            raise ValueError(f"expected trailing length {self.N}, got {v.shape[-1]}")
        c = self.inv_h2
        if self.d == 1:
            y = 2.0 * v
            y[..., 1:] -= v[..., :-1]
            y[..., :-1] -= v[..., 1:]
            return c * y
        n = self.n
        g = v.reshape(v.shape[:-1] + (n, n))
        y = 4.0 * g
        y[..., 1:, :] -= g[..., :-1, :]
        y[..., :-1, :] -= g[..., 1:, :]
        y[..., :, 1:] -= g[..., :, :-1]
        y[..., :, :-1] -= g[..., :, 1:]
        return (c * y).reshape(v.shape)

    def dense(self) -> np.ndarray:
        """Materialise the matrix (testing and tiny instances only)."""
        n = self.n
        T = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        if self.d == 1:
            return self.inv_h2 * T
        I = np.eye(n)
        return self.inv_h2 * (np.kron(I, T) + np.kron(T, I))

    def spectral_norm(self) -> float:
        """Closed-form 2-norm ``(4d / h^2) sin^2(n pi / (2(n+1)))``."""
        s = np.sin(self.n * np.pi / (2.0 * (self.n + 1)))
        return 4.0 * self.d * self.inv_h2 * s * s

    def factor_shifted(self, sigma: float) -> "ShiftedFactorization":
        return ShiftedFactorization(self, sigma)


def build_laplacian(d: int, n: int, domain_length: float) -> LaplacianOperator:
    if domain_length <= 0:
        raise ValueError(f"domain length must be positive, got {domain_length}")
    if n < 2:
        raise ValueError(f"need at least 2 interior points, got {n}")
    return LaplacianOperator(d=d, n=n, h=domain_length / (n + 1))


def spectral_norm(A: LaplacianOperator) -> float:
    return A.spectral_norm()


def power_iteration(A: LaplacianOperator, iters: int = 20000, seed: int = 0,
                    rtol: float = 1e-14) -> float:
    """Largest eigenvalue of ``A`` by power iteration (independent check)."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.N)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = A.apply(x)
        lam_new = float(x @ y)
        x = y / np.linalg.norm(y)
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return lam


@dataclass(frozen=True, eq=False)
class ShiftedFactorization:
    """Cached direct factorization of ``I + sigma * A``.

    1D uses the LAPACK tridiagonal LDL^T (``dpttrf``); 2D a banded Cholesky
    with half-bandwidth ``n``.  ``solve`` accepts one vector or a batch of
    row vectors of shape ``(B, N)``.
    """

    source: LaplacianOperator
    sigma: float
    _data: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"shift must be positive, got {self.sigma}")
        A, sig = self.source, float(self.sigma)
        c = sig * A.inv_h2
        if A.d == 1:
            n = A.n
            d, e, info = dpttrf(np.full(n, 1.0 + 2.0 * c), np.full(n - 1, -c))
            if info != 0:
                raise np.linalg.LinAlgError(f"dpttrf failed with info={info}")
            data = (d, e)
        else:
            n, N = A.n, A.N
            # lower banded storage: row k holds the k-th subdiagonal
            ab = np.zeros((n + 1, N))
            ab[0] = 1.0 + 4.0 * c
            sub = np.full(N - 1, -c)
            sub[n - 1 :: n] = 0.0  # no coupling across grid rows
            ab[1, :-1] = sub
            ab[n, : N - n] = -c
            data = (cholesky_banded(ab, lower=True),)
        object.__setattr__(self, "_data", data)

    @property
    def ldl(self):
        """Tridiagonal factors ``(d, e)`` (1D only)."""
        if self.source.d != 1:
            raise AttributeError("LDL factors exist only for the 1D operator")
        return self._data

    @property
    def band(self) -> np.ndarray:
        """Lower banded Cholesky factor, shape ``(n + 1, N)`` (2D only)."""
        if self.source.d != 2:
            raise AttributeError("the banded factor exists only for the 2D operator")
        return self._data[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=np.float64)
        N = self.source.N
        if rhs.shape[-1] != N:
            raise ValueError(f"expected trailing length {N}, got {rhs.shape[-1]}")
        single = rhs.ndim == 1
        B = rhs.reshape(-1, N).T  # (N, batch), Fortran-ordered view
        if self.source.d == 1:
            d, e = self._data
            x, info = dpttrs(d, e, B)
            if info != 0:
                raise np.linalg.LinAlgError(f"dpttrs failed with info={info}")
        else:
            x = cho_solve_banded((self._data[0], True), B, check_finite=False)
        out = np.ascontiguousarray(x.T)
        return out[0] if single else out.reshape(rhs.shape)

    def apply_shifted(self, v: np.ndarray) -> np.ndarray:
        """``(I + sigma A) v``, the inverse of :meth:`solve`."""
        return v + self.sigma * self.source.apply(v)


def factor_shifted(A: LaplacianOperator, sigma: float) -> ShiftedFactorization:
    return A.factor_shifted(sigma)


def solve_shifted(F: ShiftedFactorization, rhs: np.ndarray) -> np.ndarray:
    return F.solve(rhs)
