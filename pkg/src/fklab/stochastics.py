"""Brownian paths on model manifolds by geodesic random walk.

A path is driven by the anti-development increments dB_k ~ sqrt(h) N(0, I_n)
expressed in the initial frame.  Each step moves along the geodesic with
velocity sum_i dB_k^i F_i, where F is the parallel frame, and transports the
frame along the same geodesic.  The damped transport Q solves
dQ/ds = -1/2 Ric_F(s) Q, with Ric_F the Ricci matrix in the current frame,
by one RK4 step per grid interval.

Itô sums use left endpoints, Riemann integrals the trapezoidal rule.

Two routes produce the path functionals:

* :func:`simulate_path` / :func:`simulate_paths` keep the full
  :class:`PathRecord`; :func:`ito_q_integral`, :func:`dv_q_integral` and
  :func:`qinv_drift_integral` then work on the stored arrays.
* :func:`run_ensemble` streams the same quantities step by step
  (:class:`PathSummary`) and is what the estimators use.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import ModelManifold

MASK64 = (1 << 64) - 1
CHUNK_PATHS = 4096
BLOCK_FLOATS = 2_000_000

_default_threads = 1


def set_threads(k: int) -> None:
    """Worker threads used by :func:`run_ensemble` when none are given."""
    global _default_threads
    if k < 1:
        raise ValueError("thread count must be positive")
    _default_threads = int(k)


def get_threads() -> int:
    return _default_threads


@dataclass(frozen=True)
class SimConfig:
    t: float
    steps: int
    scheme: str = "geodesic-euler"
    exit_radius: Optional[float] = None

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("horizon t must be positive")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be a positive integer")
        if self.scheme != "geodesic-euler":
            raise ValueError(f"unsupported scheme {self.scheme!r}")

    @property
    def h(self) -> float:
        return self.t / self.steps

    def with_t(self, t):
        return SimConfig(t, self.steps, self.scheme, self.exit_radius)

    def with_steps(self, steps):
        return SimConfig(self.t, steps, self.scheme, self.exit_radius)

    def as_dict(self):
        return {"t": self.t, "steps": self.steps, "scheme": self.scheme}


@dataclass(frozen=True)
class RngStream:
    """Counter-based normal stream for one path: Philox keyed by (seed, path)."""

    master_seed: int
    path_index: int

    def generator(self) -> np.random.Generator:
        key = (int(self.master_seed) & MASK64) | ((int(self.path_index) & MASK64) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def normals(self, count: int, dim: int) -> np.ndarray:
        return self.generator().standard_normal((count, dim))


@dataclass
class PathRecord:
    """A full simulated path.  Arrays may carry a leading batch axis."""

    times: np.ndarray  # (N+1,)
    points: np.ndarray  # (..., N+1, D)
    frames: np.ndarray  # (..., N+1, n, D)
    increments: np.ndarray  # (..., N, n)
    q_samples: np.ndarray  # (..., N+1, n, n)
    exited: Optional[np.ndarray] = None

    @property
    def t(self) -> float:
        return float(self.times[-1])

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.times)


@dataclass
class PathSummary:
    """End state and path integrals of a batch of B paths."""

    x_t: np.ndarray  # (B, D)
    frame_t: np.ndarray  # (B, n, D)
    q_t: np.ndarray  # (B, n, n)
    b_t: np.ndarray  # (B, n)
    fk_exponent: np.ndarray  # (B,) int_0^t V(X_s) ds
    ito_q: np.ndarray  # (B, n) sum <Q e_i, dB>
    dv_q_bismut: np.ndarray  # (B, n) int (t-s) dV(F Q e_i) ds
    dv_q_flat: np.ndarray  # (B, n) int dV(F Q e_i) ds
    qinv_db: np.ndarray  # (B, n) int Q^-1 dB
    qinv_dv: np.ndarray  # (B, n) int (t-s) Q^-1 (dV(F_i))_i ds
    dv_abs: np.ndarray  # (B,) int |dV|(X_s) ds
    start: np.ndarray  # (B,) index of the starting point

    @property
    def weight(self) -> np.ndarray:
        return np.exp(-self.fk_exponent)

    @property
    def qinv_drift(self) -> np.ndarray:
        return self.qinv_db + self.qinv_dv


# --------------------------------------------------------------------- helpers
def _ricci_matrix(m: ModelManifold, frame):
    """Ric(F_i, F_j) for the frame, shape (..., n, n)."""
    ric = m.ricci_apply(frame)
    return m.inner(frame[..., :, None, :], ric[..., None, :, :])


# Batched small-matrix products as explicit loops over the short axis; numpy's
# einsum/matmul carry a large per-batch overhead for 2x2 and 3x3 blocks.
def _mm(A, B):
    """A @ B over leading batch axes."""
    out = A[..., :, 0, None] * B[..., None, 0, :]
    for j in range(1, A.shape[-1]):
        out = out + A[..., :, j, None] * B[..., None, j, :]
    return out


def _mv(A, v):
    """A v, i.e. sum_j A[..., i, j] v[..., j]."""
    out = A[..., :, 0] * v[..., 0, None]
    for j in range(1, A.shape[-1]):
        out = out + A[..., :, j] * v[..., j, None]
    return out


def _mtv(A, v):
    """A^T v, i.e. sum_j A[..., j, i] v[..., j]."""
    out = A[..., 0, :] * v[..., 0, None]
    for j in range(1, A.shape[-2]):
        out = out + A[..., j, :] * v[..., j, None]
    return out


def _rk4(Q, R0, R1, h):
    Rm = 0.5 * (R0 + R1)
    k1 = -0.5 * _mm(R0, Q)
    k2 = -0.5 * _mm(Rm, Q + 0.5 * h * k1)
    k3 = -0.5 * _mm(Rm, Q + 0.5 * h * k2)
    k4 = -0.5 * _mm(R1, Q + h * k3)
    return Q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _small_inv(Q):
    """Batched inverse, closed form for n <= 2."""
    n = Q.shape[-1]
    if n == 1:
        return 1.0 / Q
    if n == 2:
        a, b, c, d = Q[..., 0, 0], Q[..., 0, 1], Q[..., 1, 0], Q[..., 1, 1]
        det = a * d - b * c
        out = np.empty_like(Q)
        out[..., 0, 0], out[..., 0, 1] = d / det, -b / det
        out[..., 1, 0], out[..., 1, 1] = -c / det, a / det
        return out
    return np.linalg.inv(Q)


def _geodesic_step(m: ModelManifold, X, F, dB):
    v = _mtv(F, dB)
    Xn = m.exp_map(X, v, check=False)
    if m.is_flat:
        return Xn, F
    Fn = m.transport(X[:, None, :], v[:, None, :], F, check=False)
    return Xn, m.orthonormalize(Xn, Fn)


def _as_starts(m: ModelManifold, x, frame):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != m.ambient_dim:
        raise ValueError(f"starting point has dimension {x.shape[-1]}, {m} needs {m.ambient_dim}")
    m.check_point(x, tol=1e-8)
    if frame is None:
        frame = m.frame_at(x)
    else:
        frame = np.asarray(frame, dtype=float)
        frame = np.broadcast_to(frame, x.shape[:1] + frame.shape[-2:]).copy()
    return x, frame, single


# ------------------------------------------------------------- record route
def simulate_paths(m: ModelManifold, x, cfg: SimConfig, streams, frame=None) -> PathRecord:
    """Full records for a list of streams, all started at x."""
    x, frame, _ = _as_starts(m, x, frame)
    if x.shape[0] != 1:
        raise ValueError("simulate_paths takes a single starting point")
    streams = list(streams)
    B, N, n, h = len(streams), cfg.steps, m.dim, cfg.h
    dB = np.sqrt(h) * np.stack([s.normals(N, n) for s in streams])
    X = np.repeat(x, B, axis=0)
    F = np.repeat(frame, B, axis=0)
    Q = np.broadcast_to(np.eye(n), (B, n, n)).copy()
    R = _ricci_matrix(m, F)
    points, frames, qs = [X], [F], [Q]
    for k in range(N):
        Xn, Fn = _geodesic_step(m, X, F, dB[:, k])
        Rn = _ricci_matrix(m, Fn)
        Q = _rk4(Q, R, Rn, h)
        X, F, R = Xn, Fn, Rn
        points.append(X)
        frames.append(F)
        qs.append(Q)
    rec = PathRecord(
        times=np.linspace(0.0, cfg.t, N + 1),
        points=np.stack(points, axis=1),
        frames=np.stack(frames, axis=1),
        increments=dB,
        q_samples=np.stack(qs, axis=1),
    )
    if cfg.exit_radius is not None:
        dist = m.distance(rec.points[:, :1], rec.points)
        out = dist > cfg.exit_radius
        rec.exited = np.where(out.any(axis=1), out.argmax(axis=1), -1)
    return rec


def simulate_path(m: ModelManifold, x, cfg: SimConfig, stream: RngStream, frame=None) -> PathRecord:
    """One Brownian path X_t(x) with its frame, increments and Q."""
    rec = simulate_paths(m, x, cfg, [stream], frame)
    return PathRecord(
        rec.times,
        rec.points[0],
        rec.frames[0],
        rec.increments[0],
        rec.q_samples[0],
        None if rec.exited is None else (None if rec.exited[0] < 0 else int(rec.exited[0])),
    )


def _trapezoid(values, times):
    """Trapezoid rule over the time axis, which is axis -2 of ``values`` (..., N+1, k)."""
    h = np.diff(times)[:, None]
    return np.sum(0.5 * h * (values[..., 1:, :] + values[..., :-1, :]), axis=-2)


def ito_q_integral(path: PathRecord) -> np.ndarray:
    """Left-point sums sum_k <Q_{t_k} e_i, dB_k>, one per basis vector e_i."""
    Q = path.q_samples[..., :-1, :, :]
    return np.einsum("...kji,...kj->...i", Q, path.increments)


def _frame_dv(path: PathRecord, V):
    # dV(//_s e_j) at every stored time, shape (..., N+1, n)
    dv = V.dV(path.points)
    return np.einsum("...kjd,...kd->...kj", path.frames, dv)


def dv_q_integral(path: PathRecord, V, weight: str = "bismut") -> np.ndarray:
    """int_0^t w(s) dV(//_s Q_s e_i) ds with w = t - s ("bismut") or 1 ("flat")."""
    g = _frame_dv(path, V)
    integrand = np.einsum("...kji,...kj->...ki", path.q_samples, g)
    if weight == "bismut":
        integrand = integrand * (path.t - path.times)[:, None]
    elif weight != "flat":
        raise ValueError("weight must be 'bismut' or 'flat'")
    return _trapezoid(integrand, path.times)


def qinv_drift_integral(path: PathRecord, V=None) -> np.ndarray:
    """int_0^t Q_s^{-1} (dB_s + (t - s) //_s^{-1} grad V ds) in the initial frame."""
    det = np.linalg.det(path.q_samples)
    if np.any(det <= 0):
        raise FloatingPointError("damped transport Q is singular along the path")
    Qinv = np.linalg.inv(path.q_samples)
    ito = np.einsum("...kij,...kj->...i", Qinv[..., :-1, :, :], path.increments)
    if V is None:
        return ito
    g = _frame_dv(path, V)
    integrand = np.einsum("...kij,...kj->...ki", Qinv, g) * (path.t - path.times)[:, None]
    return ito + _trapezoid(integrand, path.times)


# ------------------------------------------------------------ streaming route
class _Walker:
    """Advances a batch of paths and accumulates every path functional."""

    def __init__(self, m: ModelManifold, X, F, cfg: SimConfig, V=None):
        self.m, self.cfg, self.V = m, cfg, V
        B, n = X.shape[0], m.dim
        self.X, self.F = X.copy(), F.copy()
        self.Q = np.broadcast_to(np.eye(n), (B, n, n)).copy()
        self.Qinv = self.Q.copy()
        self.R = None if m.is_flat else _ricci_matrix(m, self.F)
        self.k = 0
        z = np.zeros((B, n))
        self.b = z.copy()
        self.ito_q, self.qinv_db = z.copy(), z.copy()
        self.dvq_b, self.dvq_f, self.qinv_dv = z.copy(), z.copy(), z.copy()
        self.fk = np.zeros(B)
        self.dv_abs = np.zeros(B)
        self._pot = self._potential_terms(self.X, self.F)

    def _potential_terms(self, X, F):
        if self.V is None:
            return None
        dv = self.V.dV(X)
        g = _mv(F, dv)
        return self.V.V(X), g, self.m.covector_norm(X, dv)

    def step(self, dB):
        m, h, t = self.m, self.cfg.h, self.cfg.t
        s0 = self.k * h
        s1 = (self.k + 1) * h
        if m.is_flat:
            self.ito_q += dB
            self.qinv_db += dB
        else:
            self.ito_q += _mtv(self.Q, dB)
            self.qinv_db += _mv(self.Qinv, dB)
        self.b += dB
        X, F = _geodesic_step(m, self.X, self.F, dB)
        if m.is_flat:
            Q, Qinv = self.Q, self.Qinv
        else:
            R = _ricci_matrix(m, F)
            Q = _rk4(self.Q, self.R, R, h)
            Qinv = _small_inv(Q)
            self.R = R
        if self.V is not None:
            V0, g0, a0 = self._pot
            V1, g1, a1 = self._pot = self._potential_terms(X, F)
            self.fk += 0.5 * h * (V0 + V1)
            self.dv_abs += 0.5 * h * (a0 + a1)
            if m.is_flat:
                qg0, qg1, ig0, ig1 = g0, g1, g0, g1
            else:
                qg0 = _mtv(self.Q, g0)
                qg1 = _mtv(Q, g1)
                ig0 = _mv(self.Qinv, g0)
                ig1 = _mv(Qinv, g1)
            self.dvq_f += 0.5 * h * (qg0 + qg1)
            self.dvq_b += 0.5 * h * ((t - s0) * qg0 + (t - s1) * qg1)
            self.qinv_dv += 0.5 * h * ((t - s0) * ig0 + (t - s1) * ig1)
        self.X, self.F, self.Q, self.Qinv = X, F, Q, Qinv
        self.k += 1

    def summary(self, start) -> PathSummary:
        return PathSummary(
            x_t=self.X,
            frame_t=self.F,
            q_t=self.Q,
            b_t=self.b,
            fk_exponent=self.fk,
            ito_q=self.ito_q,
            dv_q_bismut=self.dvq_b,
            dv_q_flat=self.dvq_f,
            qinv_db=self.qinv_db,
            qinv_dv=self.qinv_dv,
            dv_abs=self.dv_abs,
            start=start,
        )


def _chunk_contributions(m, x, frame, cfg, seed, V, reducer, n_paths, lo, hi, antithetic, coarsen):
    flat = np.arange(lo, hi)
    start = flat // n_paths
    path = flat % n_paths
    stream_idx = path // 2 if antithetic else path
    sign = np.where(path % 2 == 1, -1.0, 1.0) if antithetic else np.ones(len(flat))
    gens = [RngStream(seed, int(i)).generator() for i in stream_idx]
    n, N, B = m.dim, cfg.steps, len(flat)
    walker = _Walker(m, x[start], frame[start], cfg, V)
    scale = np.sqrt(cfg.h / coarsen) * sign[:, None, None]
    block = max(1, min(N, BLOCK_FLOATS // max(1, B * n * coarsen)))
    done = 0
    while done < N:
        size = min(block, N - done)
        z = np.stack([g.standard_normal((size * coarsen, n)) for g in gens])
        z = z.reshape(B, size, coarsen, n).sum(axis=2) * scale
        for k in range(size):
            walker.step(z[:, k])
        done += size
    return np.asarray(reducer(walker.summary(start)), dtype=float).reshape(B, -1)


def run_ensemble(
    m: ModelManifold,
    x,
    cfg: SimConfig,
    n_paths: int,
    seed: int,
    reducer: Callable[[PathSummary], np.ndarray],
    V=None,
    *,
    frame=None,
    antithetic: bool = False,
    coarsen: int = 1,
    threads: Optional[int] = None,
) -> np.ndarray:
    """Per-path contributions ``reducer(summary)``, shape (P, n_paths, k).

    ``x`` is one starting point (P = 1) or an array of P starting points; the
    same path indices, and therefore the same driving noise, are used for
    every starting point.  With ``antithetic`` paths 2j and 2j+1 share a
    stream with opposite signs.  ``coarsen = r`` draws r normals per step and
    aggregates them, so an r-fold refined run with the same seed is coupled
    to this one.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    if antithetic and n_paths % 2:
        raise ValueError("antithetic ensembles need an even number of paths")
    x, frame, _ = _as_starts(m, x, frame)
    total = x.shape[0] * n_paths
    bounds = [(lo, min(lo + CHUNK_PATHS, total)) for lo in range(0, total, CHUNK_PATHS)]

    def job(b):
        return _chunk_contributions(
            m, x, frame, cfg, seed, V, reducer, n_paths, b[0], b[1], antithetic, coarsen
        )

    threads = threads or _default_threads
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(bounds))) as ex:
            parts = list(ex.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    out = np.concatenate(parts, axis=0)
    return out.reshape(x.shape[0], n_paths, -1)
