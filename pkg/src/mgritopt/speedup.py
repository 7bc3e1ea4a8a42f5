"""Wall-clock speedup model for 2- and 3-level MGRIT.

Costs are in units of one fine step: ``t_f = 1`` and ``t_c = t_cc = alpha``.
Communication is taken to be free.  With ``N_p`` processors

    S_2 = N_f / (N_it (N_c alpha + 2 N_f / N_p))
    S_3 = N_f / (N_it (N_cc alpha + 3 N_c alpha / min(N_p, N_c / m) + 2 N_f / N_p))

where ``N_c = N_f / m`` and ``N_cc = N_f / m^2``.  Omitting ``N_p`` uses the
full-parallel count ``N_p = N_f / m``.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np

from .propagators import Propagator

CSV_HEADER = ("levels", "m_star", "N_it", "S", "N_p")


def _check(**kw):
    for k, v in kw.items():
        if v is None or not v > 0 or not math.isfinite(v):
            raise ValueError(f"{k} must be positive and finite, got {v}")


def s2(N_f: float, m: float, N_it: float, alpha: float, N_p: float | None = None) -> float:
    """Two-level speedup estimate."""
    _check(N_f=N_f, m=m, N_it=N_it, alpha=alpha)
    if N_p is None:
        return 1.0 / (N_it * (alpha / m + 2.0 * m / N_f))
    _check(N_p=N_p)
    N_c = N_f / m
    return N_f / (N_it * (N_c * alpha + 2.0 * N_f / N_p))


def s3(N_f: float, m: float, N_it: float, alpha: float, N_p: float | None = None) -> float:
    """Three-level speedup estimate (``t_cc = t_c``)."""
    _check(N_f=N_f, m=m, N_it=N_it, alpha=alpha)
    if N_p is None:
        return 1.0 / (N_it * (alpha / m ** 2 + (2.0 * m / N_f) * (1.0 + 1.5 * alpha)))
    _check(N_p=N_p)
    N_c, N_cc = N_f / m, N_f / m ** 2
    return N_f / (N_it * (N_cc * alpha + 3.0 * N_c * alpha / min(N_p, N_c / m)
                          + 2.0 * N_f / N_p))


def _nearest(x: float) -> int:
    return int(math.floor(x + 0.5))


def optimal_m_2level_exact(N_f: float, alpha: float) -> float:
    _check(N_f=N_f, alpha=alpha)
    return math.sqrt(N_f * alpha / 2.0)


def optimal_m_2level(N_f: float, alpha: float) -> int:
    """Nearest integer to ``sqrt(N_f alpha / 2)``, the minimiser of the 2-level cost."""
    return max(1, _nearest(optimal_m_2level_exact(N_f, alpha)))


def optimal_m_3level_exact(N_f: float, alpha: float) -> float:
    _check(N_f=N_f, alpha=alpha)
    return ((N_f / 2.0) / (1.0 / alpha + 1.5)) ** (1.0 / 3.0)


def optimal_m_3level(N_f: float, alpha: float) -> int:
    """Nearest integer to ``cbrt((N_f / 2) / (1/alpha + 3/2))``."""
    return max(1, _nearest(optimal_m_3level_exact(N_f, alpha)))


def s2_optimal(N_f: float, alpha: float, N_it: float) -> float:
    """``S_2`` at the unrounded optimum: ``sqrt(N_f) / (2 N_it sqrt(2 alpha))``."""
    _check(N_f=N_f, alpha=alpha, N_it=N_it)
    return math.sqrt(N_f) / (N_it * 2.0 * math.sqrt(2.0 * alpha))


def processors(N_f: int, m: int) -> int:
    """Processors needed to give every coarse interval its own core."""
    return -(-int(N_f) // int(m))


def optimal_m(levels: int, N_f: float, alpha: float) -> int:
    if levels == 2:
        return optimal_m_2level(N_f, alpha)
    if levels == 3:
        return optimal_m_3level(N_f, alpha)
    raise ValueError("the speedup model covers 2 and 3 levels only")


def speedup(levels: int, N_f, m, N_it, alpha, N_p=None) -> float:
    if levels == 2:
        return s2(N_f, m, N_it, alpha, N_p)
    if levels == 3:
        return s3(N_f, m, N_it, alpha, N_p)
    raise ValueError("the speedup model covers 2 and 3 levels only")


@dataclass(frozen=True)
class SpeedupEstimate:
    levels: int
    m_star: int
    N_it: int
    S: float
    N_p: int
    N_f: int
    alpha: float

    def __post_init__(self):
        if not self.S > 0:
            raise ValueError("speedup must be positive")

    def row(self) -> tuple:
        return (self.levels, self.m_star, self.N_it, round(self.S, 2), self.N_p)

    def to_dict(self) -> dict:
        return asdict(self)


def estimate(levels: int, N_f: int, alpha: float, N_it: int, m: int | None = None
             ) -> SpeedupEstimate:
    """Speedup at ``m`` (the rounded optimum when omitted) with full parallelism."""
    m = optimal_m(levels, N_f, alpha) if m is None else int(m)
    return SpeedupEstimate(levels, m, int(N_it), speedup(levels, N_f, m, N_it, alpha),
                           processors(N_f, m), int(N_f), float(alpha))


def estimates_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for e in rows:
        w.writerow(e.row())
    return buf.getvalue()


@dataclass(frozen=True)
class TimingStats:
    min: float
    median: float
    max: float


@dataclass(frozen=True)
class AlphaMeasurement:
    alpha: float
    fine: TimingStats
    coarse: TimingStats
    repetitions: int
    steps_per_sample: int

    def to_dict(self) -> dict:
        return asdict(self)


def _time_steps(P: Propagator, buf: np.ndarray, steps: int) -> float:
    t = time.perf_counter()
    P.march(buf, [0], steps)
    return (time.perf_counter() - t) / steps


def measure_alpha(fine: Propagator, coarse: Propagator, u0: np.ndarray,
                  repetitions: int = 200, groups: int = 10, warmup: int = 20,
                  min_sample_time: float = 2e-4) -> AlphaMeasurement:
    """Estimate ``alpha = t_c / t_f`` for one sequential step.

    Both propagators are pre-factored, so factorization cost is excluded.  Each
    sample times a short march (enough steps to dominate timer resolution);
    fine and coarse samples are interleaved, split into ``groups`` groups, and
    the per-step time is the median of the group medians.
    """
    if repetitions < 100:
        raise ValueError("use at least 100 repetitions")
    groups = max(1, min(groups, repetitions))
    u0 = np.asarray(u0, dtype=np.float64)

    def calibrate(P):
        steps = 1
        while True:
            buf = np.empty((steps + 1, u0.size))
            buf[0] = u0
            t = time.perf_counter()
            P.march(buf, [0], steps)
            if time.perf_counter() - t >= min_sample_time or steps >= 1 << 20:
                return steps
            steps *= 2

    steps = max(calibrate(fine), calibrate(coarse))
    buf = np.empty((steps + 1, u0.size))
    buf[0] = u0
    for _ in range(warmup):
        _time_steps(fine, buf, steps)
        _time_steps(coarse, buf, steps)
    tf, tc = [], []
    for _ in range(repetitions):
        tf.append(_time_steps(fine, buf, steps))
        tc.append(_time_steps(coarse, buf, steps))

    def mom(x):
        return statistics.median(statistics.median(g) for g in np.array_split(x, groups))

    f_med, c_med = mom(tf), mom(tc)
    return AlphaMeasurement(c_med / f_med, TimingStats(min(tf), f_med, max(tf)),
                            TimingStats(min(tc), c_med, max(tc)), repetitions, steps)
