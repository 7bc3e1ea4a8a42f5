"""Multigrid reduction in time over the optimizer's iteration axis.

The fine system is ``u_0 = w_0``, ``u_i = Phi(u_{i-1})`` for ``i = 1..N``,
where ``Phi`` is one optimizer step (the constant part of the step is folded
into ``Phi``).  Coarse levels use the implicit analogue of ``Phi`` with step
``m^(l-1) s``.  Index ``i`` on a level is a C-point iff ``i % m == 0``.

Each level's system is stored as ``u_0 = g_0`` and ``u_i = Phi(u_{i-1}) + G_i``
with ``G`` omitted (all zero) on the finest level.

One iteration is: coarse-grid correction (recursive V-cycle, exact
sequential solve on the coarsest level), F-relaxation, FCF-relaxation, and a
C-point residual evaluation.  The solver starts with one FCF-relaxation, so
the reported residual is always measured on an FCF-relaxed state.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .problems import ProblemInstance
from .propagators import Propagator

VARIANTS = ("auto", "fas", "linear")


@dataclass(frozen=True)
class MGRITConfig:
    """Solver settings.

    ``nt`` is the number of fine intervals (optimizer iterations); it is padded
    up to a multiple of ``m^(levels-1)``.  ``seed`` overrides the problem's
    random stream for the initial guess.  ``threads`` falls back to the
    ``MGRITOPT_THREADS`` environment variable, then 1.
    """

    m: int
    levels: int
    nt: int
    tol: float = 1e-8
    max_iter: int = 100
    seed: int | None = None
    variant: str = "auto"
    threads: int | None = None
    stall_window: int = 5
    record_profiles: bool = False
    record_times: bool = False

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"coarsening factor must be >= 2, got {self.m}")
        if self.levels < 2:
            raise ValueError(f"need at least 2 levels, got {self.levels}")
        if self.nt < self.m ** (self.levels - 1):
            raise ValueError(
                f"nt={self.nt} is smaller than m^(levels-1)={self.m ** (self.levels - 1)}")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    @property
    def nt_padded(self) -> int:
        q = self.m ** (self.levels - 1)
        return -(-self.nt // q) * q

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("MGRITOPT_THREADS", "").strip()
        return max(1, int(env)) if env else 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Level:
    index: int
    intervals: int
    step: float
    prop: Propagator

    @property
    def npoints(self) -> int:
        return self.intervals + 1


@dataclass(frozen=True, eq=False)
class IterationHierarchy:
    m: int
    nt: int
    levels: tuple
    linear: bool

    @classmethod
    def build(cls, problem: ProblemInstance, m: int, nlevels: int, nt: int,
              variant: str = "auto") -> "IterationHierarchy":
        cfg = MGRITConfig(m=m, levels=nlevels, nt=nt, variant=variant)
        linear = resolve_variant(problem, variant) == "linear"
        s = problem.step
        n_int = cfg.nt_padded
        levels = [Level(1, n_int, s, problem.fine_propagator(s))]
        for l in range(2, nlevels + 1):
            n_int //= m
            step = m ** (l - 1) * s
            P = problem.coarse_propagator(step)
            if linear:
                P = P.homogeneous()
            levels.append(Level(l, n_int, step, P))
        return cls(m, nt, tuple(levels), linear)

    @property
    def nt_padded(self) -> int:
        return self.levels[0].intervals

    def __len__(self) -> int:
        return len(self.levels)


def resolve_variant(problem: ProblemInstance, variant: str) -> str:
    if variant == "auto":
        return "fas" if problem.nonsmooth else "linear"
    if variant == "linear" and problem.nonsmooth:
        raise ValueError("the linear correction needs an affine step; use FAS")
    return variant


@dataclass(eq=False)
class SpaceIterationState:
    """Trajectory buffer of one level: ``U[i]`` for ``i = 0..intervals``.

    ``G`` holds the level's right-hand side for ``i >= 1`` (``None`` means zero)
    and ``g0`` the initial condition, so ``U[0] == g0`` always.
    """

    level: Level
    m: int
    U: np.ndarray
    g0: np.ndarray
    G: np.ndarray | None = None
    threads: int = 1

    @property
    def c_indices(self) -> np.ndarray:
        return np.arange(0, self.level.intervals + 1, self.m)


def f_relax(state: SpaceIterationState) -> None:
    """Update every F-point by stepping from the C-point that precedes it."""
    m = state.m
    if m <= 1:
        return
    starts = np.arange(0, state.level.intervals, m)
    state.level.prop.march(state.U, starts, m - 1, state.G, state.threads)


def c_relax(state: SpaceIterationState) -> None:
    """``u_c = Phi(u_{c-1}) + G_c`` at every C-point ``c > 0``."""
    idx = state.c_indices[1:]
    Y = state.level.prop.step_rows(state.U[idx - 1], state.threads)
    if state.G is not None:
        Y += state.G[idx]
    state.U[idx] = Y


def fcf_relax(state: SpaceIterationState) -> None:
    f_relax(state)
    c_relax(state)
    f_relax(state)


def _row_sq(R: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", R, R)


def compute_residual(state: SpaceIterationState) -> tuple[np.ndarray, float]:
    """C-point residual blocks and their global 2-norm.

    ``r_0 = g_0 - u_0`` and ``r_j = G_{jm} - u_{jm} + Phi(u_{jm-1})``.  The norm
    is accumulated in a fixed order, independent of the worker count.
    """
    idx = state.c_indices
    U = state.U
    R = np.empty((idx.size, U.shape[1]))
    R[0] = state.g0 - U[0]
    R[1:] = state.level.prop.step_rows(U[idx[1:] - 1], state.threads)
    R[1:] -= U[idx[1:]]
    if state.G is not None:
        R[1:] += state.G[idx[1:]]
    return R, float(math.sqrt(np.sum(_row_sq(R))))


def restrict_inject(V: np.ndarray, m: int) -> np.ndarray:
    """Values at indices ``0, m, 2m, ...``."""
    return np.array(V[::m], copy=True)


def _coarse_solve(h: IterationHierarchy, li: int, state: SpaceIterationState) -> None:
    """One V-cycle on level ``li`` (0-based), exact on the coarsest."""
    if li == len(h.levels) - 1:
        state.U[0] = state.g0
        state.level.prop.march(state.U, [0], state.level.intervals, state.G)
        return
    fcf_relax(state)
    R, _ = compute_residual(state)
    coarse_correction(h, li, state, R)


def coarse_correction_fas(h: IterationHierarchy, li: int, state: SpaceIterationState,
                          R: np.ndarray) -> None:
    """FAS correction from level ``li`` to ``li+1`` followed by F-relaxation.

    The coarse system is ``u_0 = g_0``, ``u_j = Phi_D(u_{j-1}) + G_D,j`` with
    ``G_D,j = r_j + v_jm - Phi_D(v_(j-1)m)``, started from the injected C-points.
    """
    m = h.m
    coarse = h.levels[li + 1]
    V = restrict_inject(state.U, m)
    GD = np.empty_like(V)
    GD[0] = state.g0
    GD[1:] = R[1:] + V[1:]
    GD[1:] -= coarse.prop.step_rows(V[:-1], state.threads)
    cs = SpaceIterationState(coarse, m, V, state.g0, GD, state.threads)
    _coarse_solve(h, li + 1, cs)
    state.U[::m] = cs.U
    f_relax(state)


def coarse_correction_linear(h: IterationHierarchy, li: int, state: SpaceIterationState,
                             R: np.ndarray) -> None:
    """Residual correction: solve ``A_D e = r`` with the linear coarse step, add ``e``."""
    m = h.m
    coarse = h.levels[li + 1]
    E = np.zeros((R.shape[0], R.shape[1]))
    cs = SpaceIterationState(coarse, m, E, R[0].copy(), R, state.threads)
    _coarse_solve(h, li + 1, cs)
    state.U[::m] += cs.U
    f_relax(state)


def coarse_correction(h, li, state, R):
    if h.linear:
        coarse_correction_linear(h, li, state, R)
    else:
        coarse_correction_fas(h, li, state, R)


@dataclass
class ConvergenceReport:
    config: dict
    problem: dict
    seed: int
    variant: str
    nt: int
    nt_padded: int
    residual_norms: list = field(default_factory=list)
    gradient_norms: list = field(default_factory=list)
    error_norms: list | None = None
    halted_reason: str = "max-iter"
    wall_times: list | None = None
    profiles: dict | None = None

    @property
    def iterations(self) -> int:
        return len(self.residual_norms) - 1

    @property
    def converged(self) -> bool:
        return self.halted_reason == "converged"

    @property
    def rho_r(self) -> list:
        r = self.residual_norms
        return [r[k] / r[k - 1] if r[k - 1] > 0 else 0.0 for k in range(1, len(r))]

    @property
    def rho_e(self) -> list | None:
        e = self.error_norms
        if e is None:
            return None
        return [e[k] / e[k - 1] if e[k - 1] > 0 else 0.0 for k in range(1, len(e))]

    def to_dict(self) -> dict:
        d = {
            "config": self.config,
            "problem": self.problem,
            "seed": self.seed,
            "variant": self.variant,
            "nt": self.nt,
            "nt_padded": self.nt_padded,
            "iterations": self.iterations,
            "halted_reason": self.halted_reason,
            "residual_norms": self.residual_norms,
            "gradient_norms": self.gradient_norms,
            "rho_r": self.rho_r,
        }
        if self.error_norms is not None:
            d["error_norms"] = self.error_norms
            d["rho_e"] = self.rho_e
        if self.wall_times is not None:
            d["wall_times"] = self.wall_times
        if self.profiles is not None:
            d["profiles"] = self.profiles
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceReport":
        keys = ("config", "problem", "seed", "variant", "nt", "nt_padded", "residual_norms",
                "gradient_norms", "error_norms", "halted_reason", "wall_times", "profiles")
        return cls(**{k: d.get(k) for k in keys if k in d})


def snapshot_csv(U: np.ndarray, indices=None) -> str:
    """Trajectory rows as CSV: ``index,u_0,...,u_{N-1}`` (all rows by default)."""
    U = np.asarray(U, dtype=np.float64)
    idx = np.arange(U.shape[0]) if indices is None else np.asarray(indices, dtype=np.intp)
    lines = ["index," + ",".join(f"u_{j}" for j in range(U.shape[1]))]
    for i in idx:
        lines.append(f"{int(i)}," + ",".join(repr(float(v)) for v in U[i]))
    return "\n".join(lines) + "\n"


def _reference_errors(U: np.ndarray, reference) -> float:
    """2-norm of ``U - reference`` over their common index range."""
    n = min(U.shape[0], len(reference))
    ref = reference[:n] if isinstance(reference, np.ndarray) else reference.segment(0, n)
    return float(math.sqrt(np.sum(_row_sq(U[:n] - ref))))


def _stalled(res: list, window: int) -> bool:
    if not np.isfinite(res[-1]):
        return True
    if window <= 0 or len(res) <= window:
        return False
    tail = res[-window - 1:]
    return all(tail[i + 1] >= tail[i] for i in range(window))


def mgrit_solve(problem: ProblemInstance, config: MGRITConfig,
                callback: Callable[[int, SpaceIterationState], object] | None = None,
                reference=None, w0: np.ndarray | None = None,
                initial_guess: np.ndarray | None = None,
                stop: Callable[[int, SpaceIterationState, float], bool] | None = None,
                ) -> tuple[SpaceIterationState, ConvergenceReport]:
    """Solve the all-at-once optimizer system with MGRIT.

    Parameters
    ----------
    callback : callable, optional
        ``callback(k, state)`` after the residual of iteration ``k`` is measured
        (``k = 0`` is the relaxed initial guess).  ``state.U`` is the fine
        trajectory; it must not be modified.
    reference : array or Trajectory, optional
        Sequential trajectory; when given, the error norm per iteration is
        recorded.
    w0 : array, optional
        Initial condition, ``problem.u0`` by default.
    initial_guess : array, optional
        Fine trajectory guess; random in ``[0, 1]`` by default.
    stop : callable, optional
        ``stop(k, state, grad_norm) -> bool`` ends the solve early
        (halted reason ``"stopped"``).

    Returns
    -------
    state, report
    """
    threads = config.resolved_threads()
    variant = resolve_variant(problem, config.variant)
    h = IterationHierarchy.build(problem, config.m, config.levels, config.nt, variant)
    fine = h.levels[0]
    N = problem.N
    w0 = np.array(problem.u0 if w0 is None else w0, dtype=np.float64)
    if w0.shape != (N,):
        raise ValueError(f"initial condition must have length {N}")

    seed = problem.seed if config.seed is None else int(config.seed)
    if initial_guess is None:
        rng = problem.rng() if config.seed is None else np.random.default_rng(config.seed)
        U = rng.uniform(0.0, 1.0, (fine.npoints, N))
    else:
        U = np.array(initial_guess, dtype=np.float64)
        if U.shape != (fine.npoints, N):
            raise ValueError(f"initial guess must have shape {(fine.npoints, N)}")
    U[0] = w0
    state = SpaceIterationState(fine, config.m, U, w0, None, threads)
    grad = problem.gradient_evaluator()

    report = ConvergenceReport(config.to_dict(), problem.descriptor(), seed, variant,
                               config.nt, h.nt_padded)
    if reference is not None:
        report.error_norms = []
    if config.record_times:
        report.wall_times = []
    if config.record_profiles:
        report.profiles = {"residual_by_point": [], "gradient_by_point": [],
                           "spatial_residual": []}

    t0 = time.perf_counter()

    def measure(k):
        R, rn = compute_residual(state)
        gn = float(np.linalg.norm(grad(state.U[-1])))
        report.residual_norms.append(rn)
        report.gradient_norms.append(gn)
        if reference is not None:
            report.error_norms.append(_reference_errors(state.U, reference))
        if config.record_times:
            report.wall_times.append(time.perf_counter() - t0)
        if config.record_profiles:
            p = report.profiles
            p["residual_by_point"].append(np.sqrt(_row_sq(R)).tolist())
            p["gradient_by_point"].append(grad.norms(state.U[state.c_indices]).tolist())
            p["spatial_residual"].append(np.sqrt(np.sum(R * R, axis=0)).tolist())
        if callback is not None:
            callback(k, state)
        return R, rn, gn

    fcf_relax(state)
    R, rn, gn = measure(0)
    r0 = rn
    k = 0
    while True:
        if rn <= config.tol * r0:
            report.halted_reason = "converged"
            break
        if stop is not None and stop(k, state, gn):
            report.halted_reason = "stopped"
            break
        if _stalled(report.residual_norms, config.stall_window):
            report.halted_reason = "stalled"
            break
        if k >= config.max_iter:
            report.halted_reason = "max-iter"
            break
        coarse_correction(h, 0, state, R)
        fcf_relax(state)
        k += 1
        R, rn, gn = measure(k)
    return state, report


@dataclass
class AdaptiveReport:
    windows: list
    horizons: list
    gradient_tolerance: float
    initial_gradient_norm: float
    final_gradient_norm: float
    converged: bool
    halted_reason: str

    @property
    def total_points(self) -> int:
        return int(sum(self.horizons))

    def to_dict(self) -> dict:
        return {
            "windows": [w.to_dict() for w in self.windows],
            "horizons": self.horizons,
            "total_points": self.total_points,
            "gradient_tolerance": self.gradient_tolerance,
            "initial_gradient_norm": self.initial_gradient_norm,
            "final_gradient_norm": self.final_gradient_norm,
            "converged": self.converged,
            "halted_reason": self.halted_reason,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def next_horizon(H: int, g_start: float, g_end: float, target: float, min_h: int,
                 policy: str = "rate") -> int:
    """Length of the next window.

    ``"rate"`` estimates a per-step contraction from the last window and asks
    for 10% more steps than it predicts, clipped to ``[min_h, 4 H]``;
    ``"double"`` (also the fallback) doubles ``H``.
    """
    if policy == "rate" and 0 < g_end < g_start and target > 0:
        q = (g_end / g_start) ** (1.0 / H)
        if 0 < q < 1:
            need = math.log(target / g_end) / math.log(q)
            return int(min(max(math.ceil(1.1 * need), min_h), 4 * H))
    if policy not in ("rate", "double"):
        raise ValueError(f"unknown growth policy {policy!r}")
    return max(2 * H, min_h)


def adaptive_horizon_solve(problem: ProblemInstance, config: MGRITConfig,
                           initial_horizon: int, growth: str = "rate",
                           grad_tol: float | None = None, max_windows: int = 20,
                           ) -> tuple[np.ndarray, AdaptiveReport]:
    """MGRIT over successive iteration windows until the gradient tolerance is met.

    A window ends when its residual converges or, earlier, when the gradient
    at its final point already meets ``grad_tol * ||G(u_0)||``.  If the residual
    converged with the gradient still above tolerance the window is deemed
    stalled and a new one starts from its final state, which also serves as
    the initial guess at every point of the new window.

    Returns
    -------
    final_state, report
    """
    if initial_horizon < 1:
        raise ValueError("initial horizon must be positive")
    gtol = config.tol if grad_tol is None else grad_tol
    grad = problem.gradient_evaluator()
    g_init = float(np.linalg.norm(grad(problem.u0)))
    target = gtol * g_init
    min_h = config.m ** (config.levels - 1)

    w0 = np.array(problem.u0, dtype=np.float64)
    H = max(int(initial_horizon), min_h)
    windows, horizons = [], []
    g_end = g_init
    for widx in range(max_windows):
        cfg = MGRITConfig(**{**config.to_dict(), "nt": H})
        guess = None
        if widx > 0:
            guess = np.broadcast_to(w0, (cfg.nt_padded + 1, w0.size)).copy()
        g_start = float(np.linalg.norm(grad(w0)))
        state, rep = mgrit_solve(problem, cfg, w0=w0, initial_guess=guess,
                                 stop=lambda k, st, gn: gn <= target)
        windows.append(rep)
        horizons.append(cfg.nt_padded)
        w0 = state.U[-1].copy()
        g_end = rep.gradient_norms[-1]
        if g_end <= target:
            return w0, AdaptiveReport(windows, horizons, gtol, g_init, g_end, True, "converged")
        if rep.halted_reason not in ("converged", "stopped"):
            return w0, AdaptiveReport(windows, horizons, gtol, g_init, g_end, False,
                                      rep.halted_reason)
        H = next_horizon(cfg.nt_padded, g_start, g_end, target, min_h, growth)
    return w0, AdaptiveReport(windows, horizons, gtol, g_init, g_end, False, "max-windows")
