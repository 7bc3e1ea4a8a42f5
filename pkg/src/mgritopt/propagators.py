"""Step operators for the quadratic and penalised model problems.

All four kinds act on ``f(u) = 1/2 <A u, u> - <b, u>`` and optionally
``g(u) = lam * ||(-u)_+||_1``:

========================  =======================================
``GRADIENT_DESCENT``      ``u - s (A u - b)``
``PROXIMAL_POINT``        ``(I + s A)^{-1} (u + s b)``
``PROXIMAL_GRADIENT``     ``prox_{s g}(u - s (A u - b))``
``ALTERNATING_PROXIMAL``  ``prox_{s g}((I + s A)^{-1} (u + s b))``
========================  =======================================

The constant ``s b`` is folded into the step so that the all-at-once
right-hand side carries only the initial condition.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .linalg import LaplacianOperator, ShiftedFactorization


class Kind(str, enum.Enum):
    GRADIENT_DESCENT = "gd"
    PROXIMAL_POINT = "prox_point"
    PROXIMAL_GRADIENT = "prox_grad"
    ALTERNATING_PROXIMAL = "alt_prox"

    @property
    def implicit(self) -> bool:
        return self in (Kind.PROXIMAL_POINT, Kind.ALTERNATING_PROXIMAL)

    @property
    def has_prox(self) -> bool:
        return self in (Kind.PROXIMAL_GRADIENT, Kind.ALTERNATING_PROXIMAL)


def prox_penalty(u: np.ndarray, tau: float) -> np.ndarray:
    """Entrywise prox of ``tau * ||(-.)_+||_1``.

    Shifts entries below ``-tau`` up by ``tau``, clamps ``[-tau, 0]`` to zero
    and leaves positive entries alone.
    """
    if not tau > 0:
        raise ValueError(f"penalty weight must be positive, got {tau}")
    u = np.asarray(u, dtype=np.float64)
    # max(u, min(u + tau, 0)) covers all three branches
    return np.maximum(u, np.minimum(u + tau, 0.0))


@dataclass(frozen=True, eq=False)
class Propagator:
    """A pure step map ``Phi`` with step size ``s``.

    ``b`` is the linear term of ``f`` (``None`` for the homogeneous/linear part)
    and ``lam`` the penalty weight (required by the prox kinds).  Implicit kinds
    factor ``I + s A`` once at construction.
    """

    kind: Kind
    A: LaplacianOperator
    s: float
    b: np.ndarray | None = None
    lam: float | None = None
    factor: ShiftedFactorization | None = None
    _cstepper: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not self.s > 0:
            raise ValueError(f"step size must be positive, got {self.s}")
        if not kind.implicit:
            L = self.A.spectral_norm()
            if not self.s < 2.0 / L:
                raise ValueError(
                    f"explicit step s={self.s:g} violates the stability limit 2/L={2.0 / L:g}")
        if kind.has_prox and not (self.lam is not None and self.lam > 0):
            raise ValueError(f"{kind.value} needs a positive penalty weight")
        if self.b is not None:
            b = np.ascontiguousarray(self.b, dtype=np.float64)
            if b.shape != (self.A.N,):
                raise ValueError(f"linear term must have length {self.A.N}")
            b.flags.writeable = False
            object.__setattr__(self, "b", b)
        if kind.implicit and self.factor is None:
            object.__setattr__(self, "factor", self.A.factor_shifted(self.s))
        if kind.implicit and self.factor.sigma != self.s:
            raise ValueError("factorization shift does not match the step size")

    @property
    def tau(self) -> float:
        """Effective prox weight ``s * lam`` (0 when there is no penalty)."""
        return self.s * self.lam if self.kind.has_prox else 0.0

    @property
    def affine(self) -> bool:
        return self.b is not None

    def homogeneous(self) -> "Propagator":
        """Linear part of an affine step (``b`` dropped); linear kinds only."""
        if self.kind.has_prox:
            raise ValueError("prox steps have no linear part")
        return replace(self, b=None)

    def step_batch(self, X: np.ndarray) -> np.ndarray:
        """Apply the step to each row of ``X`` (numpy path)."""
        X = np.asarray(X, dtype=np.float64)
        s = self.s
        if self.kind.implicit:
            rhs = X + s * self.b if self.b is not None else X
            Y = self.factor.solve(rhs)
        else:
            AX = self.A.apply(X)
            Y = X - s * (AX - self.b) if self.b is not None else X - s * AX
        if self.kind.has_prox:
            Y = prox_penalty(Y, self.tau)
        return Y

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.ndim == 1:
            return self.step_rows(u[None, :])[0]
        return self.step_rows(u)

    def stepper(self):
        """Kernel object for the active backend."""
        if kernels.backend() == "cython":
            if self._cstepper is None:
                d = e = band = None
                if self.kind.implicit:
                    if self.A.d == 1:
                        d, e = self.factor.ldl
                    else:
                        band = self.factor.band
                st = kernels._ckernels.Stepper(
                    self.A.d, self.A.n, self.kind.implicit, self.s, self.A.inv_h2, self.b,
                    self.tau, d, e, band)
                object.__setattr__(self, "_cstepper", st)
            return self._cstepper
        return kernels.PyStepper(self.step_batch)

    def march(self, U: np.ndarray, starts, nsteps: int, G=None, threads: int = 1) -> None:
        """In place: ``U[c+j] = Phi(U[c+j-1]) (+ G[c+j])`` for each start ``c``."""
        kernels.parallel_march(self.stepper(), U, starts, nsteps, G, threads)

    def step_rows(self, X: np.ndarray, threads: int = 1) -> np.ndarray:
        return kernels.parallel_step_rows(self.stepper(), X, threads)


def make_propagator(kind, A, s, b=None, lam=None) -> Propagator:
    return Propagator(Kind(kind), A, float(s), b, lam)


def _require(P: Propagator, kind: Kind):
    if P.kind is not kind:
        raise ValueError(f"expected a {kind.value} propagator, got {P.kind.value}")


def gd_step(P: Propagator, u):
    _require(P, Kind.GRADIENT_DESCENT)
    return P(u)


def prox_point_step(P: Propagator, u):
    _require(P, Kind.PROXIMAL_POINT)
    return P(u)


def prox_grad_step(P: Propagator, u):
    _require(P, Kind.PROXIMAL_GRADIENT)
    return P(u)


def alt_prox_step(P: Propagator, u):
    _require(P, Kind.ALTERNATING_PROXIMAL)
    return P(u)


def power_step(P: Propagator, m: int, u):
    """``m`` successive applications of ``P`` (the ideal coarse step)."""
    if m < 1:
        raise ValueError("repeat count must be >= 1")
    for _ in range(m):
        u = P(u)
    return u


@dataclass(frozen=True)
class GeneralizedGradientEvaluator:
    """``G_s(u) = (u - prox_{s g}(u - s grad f(u))) / s``; plain ``grad f`` when g = 0."""

    A: LaplacianOperator
    b: np.ndarray
    s: float
    lam: float | None = None

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        grad = self.A.apply(u) - self.b
        if self.lam is None:
            return grad
        return (u - prox_penalty(u - self.s * grad, self.s * self.lam)) / self.s

    def norms(self, U: np.ndarray) -> np.ndarray:
        """Row-wise 2-norms of the generalized gradient."""
        return np.linalg.norm(self(U), axis=-1)


def generalized_gradient(E: GeneralizedGradientEvaluator, u):
    return E(u)
