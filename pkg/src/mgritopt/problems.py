"""Model problem instances.

``mp1``
    ``min 1/2 <A_1 u, u> - <b, u>`` on a unit-length 1D mesh, ``b`` uniform
    random in ``[0, 1]``.
``mp2-1d`` / ``mp2-2d``
    Shifted obstacle problem in exact-penalty form on ``[0, 3 pi]^d``:
    ``min 1/2 <A_d u, u> - <p, u> + lam ||(-u)_+||_1`` with ``p = -A_d phi``;
    the membrane is recovered as ``u + phi``.

All randomness (``b`` and the initial optimizer point) comes from a single
``numpy.random.Generator`` seeded with ``seed``.  Its state after the problem
draws is kept so that MGRIT initial guesses continue the same stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .linalg import LaplacianOperator, build_laplacian
from .propagators import GeneralizedGradientEvaluator, Kind, Propagator

KINDS = ("mp1", "mp2-1d", "mp2-2d")
DEFAULT_LAMBDA = 900.0
MP2_DOMAIN = 3.0 * np.pi


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    kind: str
    A: LaplacianOperator
    linear: np.ndarray
    u0: np.ndarray
    seed: int
    lam: float | None = None
    phi: np.ndarray | None = None
    _rng_state: dict = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def d(self) -> int:
        return self.A.d

    @property
    def N(self) -> int:
        return self.A.N

    @property
    def L(self) -> float:
        return self.A.spectral_norm()

    @property
    def step(self) -> float:
        """Fine-level step ``1/L``."""
        return 1.0 / self.L

    @property
    def nonsmooth(self) -> bool:
        return self.lam is not None

    def rng(self) -> np.random.Generator:
        """Generator positioned just after the problem's own draws."""
        g = np.random.default_rng()
        g.bit_generator.state = self._rng_state
        return g

    def grad_f(self, u):
        return self.A.apply(u) - self.linear

    def objective(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        val = 0.5 * np.sum(self.A.apply(u) * u, axis=-1) - u @ self.linear
        if self.lam is not None:
            val = val + self.lam * np.sum(np.maximum(-u, 0.0), axis=-1)
        return val

    def gradient_evaluator(self, s: float | None = None) -> GeneralizedGradientEvaluator:
        return GeneralizedGradientEvaluator(self.A, self.linear, s or self.step, self.lam)

    def fine_propagator(self, s: float | None = None) -> Propagator:
        kind = Kind.PROXIMAL_GRADIENT if self.nonsmooth else Kind.GRADIENT_DESCENT
        return self.propagator(kind, s or self.step)

    def coarse_propagator(self, s: float) -> Propagator:
        kind = Kind.ALTERNATING_PROXIMAL if self.nonsmooth else Kind.PROXIMAL_POINT
        return self.propagator(kind, s)

    def propagator(self, kind, s: float) -> Propagator:
        kind = Kind(kind)
        lam = self.lam if kind.has_prox else None
        if kind.has_prox and lam is None:
            raise ValueError(f"{kind.value} needs a penalised problem")
        return Propagator(kind, self.A, float(s), self.linear, lam)

    def minimizer_smooth(self) -> np.ndarray:
        """``A^{-1} b``, the exact minimizer when there is no penalty."""
        if self.nonsmooth:
            raise ValueError("closed-form minimizer only exists for the quadratic problem")
        return spsolve(sp.csc_matrix(self.A.dense()), self.linear)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "n": self.n, "d": self.d, "lambda": self.lam,
                "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.descriptor())


def build_mp1(n: int, seed: int = 0) -> ProblemInstance:
    A = build_laplacian(1, n, 1.0)
    rng = np.random.default_rng(seed)
    b = rng.uniform(0.0, 1.0, n)
    u0 = rng.uniform(0.0, 1.0, n)
    return ProblemInstance("mp1", A, b, u0, seed, _rng_state=rng.bit_generator.state)


def obstacle(x, y=None):
    """``max(0, sin x)`` in 1D, ``max(0, sin x) max(0, sin y)`` in 2D."""
    phi = np.maximum(0.0, np.sin(x))
    if y is not None:
        phi = phi * np.maximum(0.0, np.sin(y))
    return phi


def mesh_points(n: int, length: float = MP2_DOMAIN) -> np.ndarray:
    h = length / (n + 1)
    return h * np.arange(1, n + 1)


def build_mp2(d: int, n: int, lam: float = DEFAULT_LAMBDA, seed: int = 0) -> ProblemInstance:
    if not lam > 0:
        raise ValueError(f"penalty must be positive, got {lam}")
    A = build_laplacian(d, n, MP2_DOMAIN)
    x = mesh_points(n)
    if d == 1:
        phi = obstacle(x)
    else:
        X, Y = np.meshgrid(x, x, indexing="ij")
        phi = obstacle(X, Y).ravel()
    p = -A.apply(phi)
    rng = np.random.default_rng(seed)
    u0 = rng.uniform(0.0, 1.0, A.N)
    kind = "mp2-1d" if d == 1 else "mp2-2d"
    return ProblemInstance(kind, A, p, u0, seed, float(lam), phi,
                           _rng_state=rng.bit_generator.state)


def build_problem(kind: str, n: int, seed: int = 0, lam: float | None = None) -> ProblemInstance:
    kind = kind.lower()
    if kind == "mp1":
        return build_mp1(n, seed)
    if kind in ("mp2-1d", "mp2-2d"):
        d = 1 if kind == "mp2-1d" else 2
        return build_mp2(d, n, DEFAULT_LAMBDA if lam is None else lam, seed)
    raise ValueError(f"unknown problem kind {kind!r}; expected one of {KINDS}")


def from_descriptor(desc: dict | str) -> ProblemInstance:
    if isinstance(desc, str):
        desc = json.loads(desc)
    return build_problem(desc["kind"], int(desc["n"]), int(desc.get("seed", 0)),
                         desc.get("lambda"))


def exact_solution_mp2_1d(x):
    """Continuous membrane for the 1D obstacle on ``[0, 3 pi]``."""
    x = np.asarray(x, dtype=np.float64)
    if np.any((x < 0) | (x > MP2_DOMAIN)):
        raise ValueError("coordinate outside [0, 3 pi]")
    flat = (x >= 0.5 * np.pi) & (x <= 2.5 * np.pi)
    return np.where(flat, 1.0, np.sin(x))


def unshift(u, phi):
    u = np.asarray(u, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if u.shape[-1] != phi.shape[-1]:
        raise ValueError("state and obstacle lengths differ")
    return u + phi
