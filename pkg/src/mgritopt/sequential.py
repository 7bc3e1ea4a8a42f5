"""Serial baseline: run the fine-level optimizer to tolerance.

The run stops at the first ``k`` with ``||G(u_k)|| <= tol ||G(u_0)||`` and
that ``k`` is ``N_t``.  Iterates are kept in a :class:`Trajectory`, which
stores every row while that stays under a value budget and otherwise keeps
evenly strided checkpoints, recomputing intermediate rows on demand.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .problems import ProblemInstance
from .propagators import Kind, Propagator

MAX_STORED_VALUES = 2 ** 28
CHECKPOINT_MAGIC = b"MGRTRAJ1"
_CHUNK = 4096


class Trajectory:
    """Iterates ``u_0 .. u_{N_t}`` of a fixed-step optimizer.

    Rows at multiples of ``stride`` are stored; others are recomputed by
    stepping ``propagator`` forward from the nearest stored row.  With
    ``stride == 1`` every row is stored.
    """

    def __init__(self, propagator: Propagator, stride: int, rows: np.ndarray,
                 last_index: int, final: np.ndarray, meta: dict | None = None):
        self.propagator = propagator
        self.stride = int(stride)
        self._rows = rows
        self.last_index = int(last_index)
        self.final = final
        self.meta = dict(meta or {})

    def __len__(self) -> int:
        return self.last_index + 1

    @property
    def full(self) -> bool:
        return self.stride == 1

    @property
    def stored(self) -> np.ndarray:
        """Stored rows (indices ``0, stride, 2 stride, ...``)."""
        return self._rows

    def __getitem__(self, i: int) -> np.ndarray:
        i = int(i)
        if i < 0:
            i += len(self)
        if not 0 <= i <= self.last_index:
            raise IndexError(f"trajectory index {i} out of range 0..{self.last_index}")
        if i == self.last_index:
            return self.final.copy()
        q, rem = divmod(i, self.stride)
        if rem == 0:
            return self._rows[q].copy()
        return self.segment(q * self.stride, i + 1)[-1]

    def segment(self, start: int, stop: int) -> np.ndarray:
        """Rows ``start .. stop-1`` as a new ``(stop-start, N)`` array."""
        if not 0 <= start < stop <= len(self):
            raise IndexError("bad trajectory segment")
        if self.full:
            out = self._rows[start:stop].copy()
            if stop == len(self):
                out[-1] = self.final
            return out
        base = (start // self.stride) * self.stride
        buf = np.empty((stop - base, self._rows.shape[1]))
        buf[0] = self._rows[base // self.stride]
        if stop - base > 1:
            self.propagator.march(buf, [0], stop - base - 1)
        return buf[start - base:]

    def array(self) -> np.ndarray:
        return self.segment(0, len(self))

    # -- checkpoint file -------------------------------------------------
    def save(self, path) -> None:
        """Binary checkpoint: magic, uint32 header length, JSON header, float64 rows.

        Rows are the stored checkpoints followed by the final iterate, all
        little-endian.
        """
        header = dict(self.meta)
        header.update({"N_t": self.last_index, "stride": self.stride,
                       "rows": int(self._rows.shape[0]), "N": int(self._rows.shape[1])})
        hb = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(struct.pack("<I", len(hb)))
            fh.write(hb)
            fh.write(np.ascontiguousarray(self._rows, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.final, dtype="<f8").tobytes())

    @staticmethod
    def read_checkpoint(path) -> tuple[dict, np.ndarray, np.ndarray]:
        """Return ``(header, stored_rows, final)`` from a checkpoint file."""
        data = Path(path).read_bytes()
        if data[:8] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a trajectory checkpoint")
        (hlen,) = struct.unpack("<I", data[8:12])
        header = json.loads(data[12:12 + hlen].decode("utf-8"))
        body = np.frombuffer(data, dtype="<f8", offset=12 + hlen)
        rows, N = header["rows"], header["N"]
        if body.size != (rows + 1) * N:
            raise ValueError(f"{path}: truncated checkpoint")
        body = body.reshape(rows + 1, N).astype(np.float64)
        return header, body[:-1], body[-1]

    @classmethod
    def load(cls, path, propagator: Propagator) -> "Trajectory":
        header, rows, final = cls.read_checkpoint(path)
        return cls(propagator, header["stride"], rows, header["N_t"], final, header)


class _Store:
    """Stride-doubling row store with a fixed value budget."""

    def __init__(self, N: int, max_values: int):
        self.N = N
        self.cap = max(2, int(max_values) // N)
        self.stride = 1
        self.buf = np.empty((min(self.cap, 1024), N))
        self.count = 0

    def add(self, first_index: int, rows: np.ndarray) -> None:
        idx = first_index + np.arange(rows.shape[0])
        take = rows[idx % self.stride == 0]
        while self.count + take.shape[0] > self.cap:
            self.buf[: (self.count + 1) // 2] = self.buf[: self.count : 2]
            self.count = (self.count + 1) // 2
            self.stride *= 2
            take = rows[idx % self.stride == 0]
        need = self.count + take.shape[0]
        if need > self.buf.shape[0]:
            new = np.empty((min(self.cap, max(need, 2 * self.buf.shape[0])), self.N))
            new[: self.count] = self.buf[: self.count]
            self.buf = new
        self.buf[self.count:need] = take
        self.count = need

    def rows(self) -> np.ndarray:
        return self.buf[: self.count].copy()


@dataclass
class SequentialResult:
    N_t: int
    converged: bool
    grad_norms: np.ndarray
    final: np.ndarray
    trajectory: Trajectory | None
    method: str
    tol: float
    seed: int
    descriptor: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "problem": self.descriptor,
            "method": self.method,
            "tol": self.tol,
            "seed": self.seed,
            "N_t": self.N_t,
            "converged": self.converged,
            "initial_gradient_norm": float(self.grad_norms[0]),
            "final_gradient_norm": float(self.grad_norms[-1]),
            "gradient_norms": [float(g) for g in self.grad_norms],
        }


def gradient_noise_floor(problem: ProblemInstance, u: np.ndarray) -> float:
    """Rounding level of ``||G(u)||``; smaller values are indistinguishable from 0."""
    scale = problem.L * float(np.linalg.norm(u)) + float(np.linalg.norm(problem.linear))
    return 64.0 * np.finfo(np.float64).eps * scale


def default_method(problem: ProblemInstance) -> Kind:
    return Kind.PROXIMAL_GRADIENT if problem.nonsmooth else Kind.GRADIENT_DESCENT


def run_sequential(problem: ProblemInstance, method=None, tol: float = 1e-8,
                   max_iter: int = 10_000_000, u0=None, s: float | None = None,
                   store: str = "auto", max_values: int = MAX_STORED_VALUES,
                   chunk: int = _CHUNK) -> SequentialResult:
    """Iterate ``u_{k+1} = Phi(u_k)`` until the generalized gradient drops by ``tol``.

    Parameters
    ----------
    method : {"gd", "prox_grad", "prox_point", "alt_prox"}, optional
        Defaults to gradient descent for the quadratic problem and proximal
        gradient for the penalised one.
    s : float, optional
        Step size, ``1/L`` by default.  Gradients are always measured with the
        fine step ``1/L``.
    store : {"auto", "full", "none"}
        ``"auto"`` keeps every iterate up to ``max_values`` stored values and
        strided checkpoints beyond; ``"full"`` raises instead of striding;
        ``"none"`` keeps only the final iterate.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if store not in ("auto", "full", "none"):
        raise ValueError(f"unknown storage mode {store!r}")
    kind = default_method(problem) if method is None else Kind(method)
    prop = problem.propagator(kind, problem.step if s is None else s)
    grad = problem.gradient_evaluator()
    N = problem.N
    u = np.array(problem.u0 if u0 is None else u0, dtype=np.float64)
    if u.shape != (N,):
        raise ValueError(f"initial point must have length {N}")

    g0 = float(np.linalg.norm(grad(u)))
    target = max(tol * g0, gradient_noise_floor(problem, u))
    norms = [g0]
    st = _Store(N, max_values if store != "none" else 2 * N) if store != "none" else None
    if st is not None:
        st.add(0, u[None, :])

    buf = np.empty((chunk + 1, N))
    k = 0
    converged = g0 <= target
    while not converged and k < max_iter:
        steps = min(chunk, max_iter - k)
        buf[0] = u
        prop.march(buf, [0], steps)
        gn = grad.norms(buf[1:steps + 1])
        hit = np.flatnonzero(gn <= target)
        used = steps if hit.size == 0 else int(hit[0]) + 1
        norms.extend(gn[:used].tolist())
        if st is not None:
            st.add(k + 1, buf[1:used + 1])
            if store == "full" and st.stride > 1:
                raise MemoryError("full trajectory exceeds the storage budget")
        u = buf[used].copy()
        k += used
        converged = hit.size > 0

    traj = None
    meta = {**problem.descriptor(), "method": kind.value}
    if st is not None:
        traj = Trajectory(prop, st.stride, st.rows(), k, u, meta)
    return SequentialResult(k, bool(converged), np.asarray(norms), u, traj, kind.value,
                            tol, problem.seed, problem.descriptor())
