"""Checks tying MGRIT runs to the optimization theory, plus figure extracts.

All bound checks are one-sided: a check fails only when the slack
``rhs - lhs`` drops below ``-SLACK_TOL``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .mgrit import ConvergenceReport, MGRITConfig, mgrit_solve
from .problems import ProblemInstance
from .propagators import Kind

SLACK_TOL = 1e-10
FIGURES = ("grad-by-iteration", "res-by-iteration", "spatial-residual")


def lemma_slack(problem: ProblemInstance, V: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``L sqrt(2) ||v_i - u_i|| + ||G(u_i)|| - ||G(v_i)||`` for each row pair."""
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    if V.shape != U.shape:
        raise ValueError("trajectories must have the same shape")
    G = problem.gradient_evaluator()
    e = np.linalg.norm(V - U, axis=1)
    return problem.L * math.sqrt(2.0) * e + G.norms(U) - G.norms(V)


def check_lemma_bound(problem: ProblemInstance, V: np.ndarray, reference,
                      indices=None) -> np.ndarray:
    """Slack of the gradient bound at the sampled fine indices.

    Parameters
    ----------
    V : array, shape (N_V, N)
        MGRIT iterate (fine trajectory).
    reference : array or Trajectory
        Sequential trajectory of the same problem and initial point.
    indices : array of int, optional
        Fine indices to sample; all common indices by default.
    """
    n = min(V.shape[0], len(reference))
    idx = np.arange(n) if indices is None else np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError("sample index outside the common trajectory range")
    if isinstance(reference, np.ndarray):
        U = reference[idx]
    else:
        U = np.stack([reference[int(i)] for i in idx]) if idx.size else np.empty((0, V.shape[1]))
    return lemma_slack(problem, V[idx], U)


def all_at_once_matrix(problem: ProblemInstance, nt: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense block lower-bidiagonal system of the quadratic problem.

    Returns ``(A, w)`` with ``A`` of order ``N (nt + 1)``: identity blocks on the
    diagonal, ``-(I - s A_1)`` below it, and ``w = (u_0, s b, ..., s b)``, so that
    the sequential gradient-descent trajectory is ``A^{-1} w``.
    """
    if problem.nonsmooth:
        raise ValueError("the dense system exists only for the quadratic problem")
    N = problem.N
    if N * (nt + 1) > 4096:
        raise ValueError("dense all-at-once system too large")
    s = problem.step
    M = np.eye(N) - s * problem.A.dense()
    A = np.eye(N * (nt + 1))
    for i in range(1, nt + 1):
        A[i * N:(i + 1) * N, (i - 1) * N:i * N] = -M
    w = np.concatenate([problem.u0] + [s * problem.linear] * nt)
    return A, w


@dataclass
class DenseBoundResult:
    norm_inv: float
    slacks: np.ndarray          # (iterations + 1, nt + 1)
    residual_norms: np.ndarray  # full residual 2-norm per iteration
    error_norms: np.ndarray     # ||A^{-1} r|| per iteration
    report: ConvergenceReport

    @property
    def min_slack(self) -> float:
        return float(self.slacks.min())

    @property
    def ok(self) -> bool:
        return self.min_slack >= -SLACK_TOL


def check_residual_bound_dense(problem: ProblemInstance, nt: int = 16, m: int = 4,
                               levels: int = 2, **config) -> DenseBoundResult:
    """Residual form of the gradient bound on a tiny quadratic instance.

    ``||A^{-1}||_2`` is the reciprocal of the smallest singular value of the
    assembled all-at-once matrix; the residual is evaluated over every fine
    point, not just the C-points.
    """
    if problem.N > 4 or nt > 16:
        raise ValueError("dense check is limited to n <= 4 and nt <= 16")
    A, w = all_at_once_matrix(problem, nt)
    sv = np.linalg.svd(A, compute_uv=False)
    norm_inv = 1.0 / sv[-1]
    u = np.linalg.solve(A, w).reshape(nt + 1, problem.N)
    G = problem.gradient_evaluator()
    gu = G.norms(u)
    c = problem.L * math.sqrt(2.0) * norm_inv
    slacks, rn, en = [], [], []

    def cb(k, state):
        v = state.U[: nt + 1]
        r = w - A @ v.ravel()
        rr = float(np.linalg.norm(r))
        rn.append(rr)
        en.append(float(np.linalg.norm(np.linalg.solve(A, r))))
        slacks.append(c * rr + gu - G.norms(v))

    cfg = MGRITConfig(m=m, levels=levels, nt=nt, **config)
    if cfg.nt_padded != nt:
        raise ValueError("nt must be a multiple of m^(levels-1) for the dense check")
    _, rep = mgrit_solve(problem, cfg, callback=cb)
    return DenseBoundResult(norm_inv, np.array(slacks), np.array(rn), np.array(en), rep)


@dataclass
class Envelope:
    rho_r: float
    rho_max: float
    constant: float
    floor: float
    bound: np.ndarray
    holds: bool


def fit_rho(residuals) -> float:
    """Geometric mean of residual ratios, dropping the first and last ratio.

    With fewer than three ratios all of them are used.
    """
    r = np.asarray(residuals, dtype=np.float64)
    if r.size < 2:
        raise ValueError("need at least two residual norms")
    ratios = r[1:] / r[:-1]
    if ratios.size >= 3:
        ratios = ratios[1:-1]
    return float(np.exp(np.mean(np.log(ratios))))


def convergence_envelope(report: ConvergenceReport, floor: float, rtol: float = 1e-6
                         ) -> Envelope:
    """Check ``||G(v_N^k)|| <= C rho^k + floor`` with ``C`` fixed at ``k = 0``.

    ``rho`` is the largest observed residual contraction factor, which keeps
    the envelope an upper bound for every ``k``; the fitted factor is
    reported alongside.
    """
    g = np.asarray(report.gradient_norms, dtype=np.float64)
    res = np.asarray(report.residual_norms, dtype=np.float64)
    rho_fit = fit_rho(res)
    rho_max = float(np.max(res[1:] / res[:-1]))
    C = max(g[0] - floor, 0.0)
    k = np.arange(g.size)
    bound = C * rho_max ** k + floor
    holds = bool(np.all(g <= bound * (1.0 + rtol) + SLACK_TOL))
    return Envelope(rho_fit, rho_max, C, floor, bound, holds)


def extract_figure_data(report: ConvergenceReport, which: str) -> str:
    """Long-format CSV for one figure panel.

    ``grad-by-iteration`` and ``res-by-iteration`` give per-C-point norms
    (columns ``iteration,index,value`` with the fine index of the C-point);
    ``spatial-residual`` gives the residual norm over C-points for each spatial
    component (columns ``iteration,component,value``).
    """
    if which not in FIGURES:
        raise ValueError(f"unknown figure {which!r}; expected one of {FIGURES}")
    if report.profiles is None:
        raise ValueError("run was recorded without profiles")
    key = {"grad-by-iteration": "gradient_by_point",
           "res-by-iteration": "residual_by_point",
           "spatial-residual": "spatial_residual"}[which]
    m = int(report.config["m"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("iteration", "component" if which == "spatial-residual" else "index", "value"))
    for k, vals in enumerate(report.profiles[key]):
        step = 1 if which == "spatial-residual" else m
        for j, v in enumerate(vals):
            w.writerow((k, j * step, repr(float(v))))
    return buf.getvalue()


def generalized_gradient_lipschitz_ratio(problem: ProblemInstance, X: np.ndarray,
                                         Y: np.ndarray) -> np.ndarray:
    """``||G(x) - G(y)|| / ||x - y||`` scaled by ``s / sqrt(2)`` (bounded by 1)."""
    G = problem.gradient_evaluator()
    s = G.s
    num = np.linalg.norm(G(X) - G(Y), axis=-1)
    den = np.linalg.norm(np.asarray(X) - np.asarray(Y), axis=-1)
    return num * s / (math.sqrt(2.0) * den)


def fine_method(problem: ProblemInstance) -> Kind:
    return Kind.PROXIMAL_GRADIENT if problem.nonsmooth else Kind.GRADIENT_DESCENT
