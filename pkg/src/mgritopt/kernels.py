"""Step-kernel backends.

Two interchangeable implementations of the inner loops sit behind one
interface: the compiled ``_ckernels.Stepper`` and a numpy fallback.  The backend is selected at
import time; ``MGRITOPT_PURE_PYTHON=1`` forces the fallback, and
:func:`use_backend` switches at runtime (used by tests and the benchmark).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

try:
    if os.environ.get("MGRITOPT_PURE_PYTHON", "").strip() not in ("", "0"):
        raise ImportError("compiled kernels disabled by MGRITOPT_PURE_PYTHON")
    from . import _ckernels
except ImportError:  # not built, or disabled
    _ckernels = None

COMPILED_AVAILABLE = _ckernels is not None
_backend = "cython" if COMPILED_AVAILABLE else "python"


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("cython", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "cython" and not COMPILED_AVAILABLE:
        raise RuntimeError("compiled kernels are not available in this install")
    _backend = name


@contextmanager
def use_backend(name: str):
    prev = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


class PyStepper:
    """Numpy fallback; ``step_batch`` maps a ``(B, N)`` array to ``(B, N)``."""

    def __init__(self, step_batch):
        self._step = step_batch

    def march(self, U, starts, nsteps, G=None):
        starts = np.asarray(starts, dtype=np.intp)
        if starts.size == 0 or nsteps == 0:
            return
        if starts.min() < 0 or starts.max() + nsteps > U.shape[0] - 1:
            raise IndexError("march runs past the trajectory")
        if starts.size == 1:
            # sequential march: avoid fancy-index copies
            c = int(starts[0])
            for j in range(1, nsteps + 1):
                y = self._step(U[c + j - 1 : c + j])
                if G is not None:
                    y += G[c + j]
                U[c + j] = y[0]
            return
        for j in range(1, nsteps + 1):
            rows = starts + j
            y = self._step(U[rows - 1])
            if G is not None:
                y += G[rows]
            U[rows] = y

    def step_rows(self, X, Y):
        Y[...] = self._step(X)


def _chunks(n: int, parts: int):
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [(bounds[i], bounds[i + 1]) for i in range(parts) if bounds[i + 1] > bounds[i]]


def parallel_march(stepper, U, starts, nsteps, G=None, threads: int = 1):
    """March disjoint intervals, optionally spread over worker threads.

    Intervals are independent, so any split gives bit-identical results.
    """
    starts = np.ascontiguousarray(starts, dtype=np.intp)
    if threads <= 1 or starts.size < 2:
        stepper.march(U, starts, nsteps, G)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(stepper.march, U, starts[a:b], nsteps, G)
                for a, b in _chunks(starts.size, threads)]
        for f in futs:
            f.result()


def parallel_step_rows(stepper, X, threads: int = 1) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.empty_like(X)
    if threads <= 1 or X.shape[0] < 2:
        stepper.step_rows(X, Y)
        return Y
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(stepper.step_rows, X[a:b], Y[a:b])
                for a, b in _chunks(X.shape[0], threads)]
        for f in futs:
            f.result()
    return Y
