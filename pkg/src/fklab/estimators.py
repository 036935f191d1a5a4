"""Monte Carlo estimators of P_t^V f and of its derivative formulas.

All estimators run on the streaming ensemble of :mod:`fklab.stochastics`.
Vector-valued results (gradients) are expressed in the orthonormal frame at
the starting point, which is returned in ``Estimate.extra['frame']``; use
:func:`to_tangent` for ambient components.

Notation for a path started at x with frame F_0:

* W      = exp(-int_0^t V(X_s) ds), trapezoidal;
* I      = int_0^t Q_s^{-1}(dB_s + (t - s) //_s^{-1} grad V ds)  (``qinv_drift``);
* ito_q  = int_0^t <Q_s e_i, dB_s>,  dv_q = int_0^t (t - s) dV(//_s Q_s e_i) ds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import fields
from .bundles import FlowBundle, OneFormBundle, PotentialBundle, ScalarFieldBundle
from .geometry import ModelManifold
from .results import Estimate, delta_method
from .stochastics import PathSummary, SimConfig, run_ensemble

DEFAULT_STEPS = 100


# --------------------------------------------------------------------- inputs
def as_scalar_field(m: ModelManifold, f) -> ScalarFieldBundle:
    if isinstance(f, ScalarFieldBundle):
        return f
    if isinstance(f, fields.AmbientField):
        return ScalarFieldBundle.from_field(m, f, name=f.label)
    if np.isscalar(f):
        return ScalarFieldBundle.from_field(m, fields.constant(float(f)), name=f"const({f:g})")
    if callable(f):
        return ScalarFieldBundle.from_callable(m, f)
    raise TypeError(f"cannot use {f!r} as a scalar field")


def _cfg(cfg: Optional[SimConfig], t: float) -> SimConfig:
    if not t > 0:
        raise ValueError("horizon t must be positive")
    return SimConfig(t, DEFAULT_STEPS) if cfg is None else cfg.with_t(t)


def _potential(V):
    # a potential that is identically zero adds nothing to the walk
    if V is None or (V.is_constant and V.inf_V == 0.0 and V.sup_abs == 0.0):
        return None
    return V


def start_frame(m: ModelManifold, x, frame=None):
    return m.frame_at(np.asarray(x, dtype=float)) if frame is None else np.asarray(frame, dtype=float)


def to_tangent(m: ModelManifold, est: Estimate):
    """Ambient tangent vector sum_i mean_i F_i of a frame-coordinate gradient."""
    return m.tangent_from_frame(est.extra["frame"], est.mean)


# ------------------------------------------------------------------ integrands
# Each builder returns reducer(summary) -> (B, k) per-path contributions.
def _weight(s: PathSummary):
    return s.weight


def semigroup_integrand(f: ScalarFieldBundle):
    return lambda s: (_weight(s) * f.f(s.x_t))[:, None]


def bismut_integrand(f: ScalarFieldBundle, t: float):
    def red(s):
        return (_weight(s) * f.f(s.x_t))[:, None] * (s.ito_q - s.dv_q_bismut) / t

    return red


def derivative_integrand(f: ScalarFieldBundle):
    """W [df(//_t Q_t e_i) - f(X_t) int dV(//_s Q_s e_i) ds], one column per e_i."""

    def red(s):
        df = np.einsum("bjd,bd->bj", s.frame_t, f.df(s.x_t))
        qdf = np.einsum("bji,bj->bi", s.q_t, df)
        return _weight(s)[:, None] * (qdf - f.f(s.x_t)[:, None] * s.dv_q_flat)

    return red


def _frame_q_drift(s: PathSummary):
    # //_t Q_t I as frame coordinates at X_t
    return np.einsum("bjk,bk->bj", s.q_t, s.qinv_drift)


def divergence_integrand(alpha: OneFormBundle, t: float):
    def red(s):
        a = np.einsum("bjd,bd->bj", s.frame_t, alpha.alpha(s.x_t))
        return (-_weight(s) / t * np.sum(a * _frame_q_drift(s), axis=-1))[:, None]

    return red


def inside_integrand(f: ScalarFieldBundle, Y: Callable, divY: Callable, t: float, m: ModelManifold):
    def red(s):
        y = m.frame_coords(s.frame_t, Y(s.x_t))
        pair = np.sum(y * _frame_q_drift(s), axis=-1)
        return (_weight(s) * f.f(s.x_t) * (-divY(s.x_t) + pair / t))[:, None]

    return red


def combine(*reducers):
    """Concatenate several integrands column-wise (joint per-path samples)."""
    return lambda s: np.concatenate([np.asarray(r(s), dtype=float).reshape(len(s.start), -1) for r in reducers], axis=1)


def sample(
    m: ModelManifold,
    x,
    cfg: SimConfig,
    n_paths: int,
    seed: int,
    V: Optional[PotentialBundle],
    reducer,
    *,
    frame=None,
    antithetic=False,
    coarsen=1,
    threads=None,
):
    """Per-path samples (P, n_paths, k) for one or several starting points."""
    return run_ensemble(
        m,
        x,
        cfg,
        n_paths,
        seed,
        reducer,
        _potential(V),
        frame=frame,
        antithetic=antithetic,
        coarsen=coarsen,
        threads=threads,
    )


def _estimate(samples, cfg, seed, antithetic, **extra):
    return Estimate.from_samples(samples, cfg, seed, antithetic=antithetic, **extra)


# ----------------------------------------------------------------- estimators
def semigroup(m, x, t, V, f, cfg=None, n_paths=10_000, seed=0, *, antithetic=False, coarsen=1, threads=None) -> Estimate:
    """P_t^V f(x) = E[W f(X_t(x))]."""
    cfg = _cfg(cfg, t)
    f = as_scalar_field(m, f)
    s = sample(m, x, cfg, n_paths, seed, V, semigroup_integrand(f), antithetic=antithetic, coarsen=coarsen, threads=threads)
    return _estimate(s[0], cfg, seed, antithetic)


def bismut_gradient(m, x, t, V, f, cfg=None, n_paths=10_000, seed=0, *, frame=None, antithetic=False, coarsen=1, threads=None) -> Estimate:
    """(dP_t^V f)_x in the frame at x by the explicit Bismut formula."""
    cfg = _cfg(cfg, t)
    f = as_scalar_field(m, f)
    frame = start_frame(m, x, frame)
    s = sample(m, x, cfg, n_paths, seed, V, bismut_integrand(f, t), frame=frame, antithetic=antithetic, coarsen=coarsen, threads=threads)
    return _estimate(s[0], cfg, seed, antithetic, frame=frame)


def derivative_formula(m, x, v, t, V, f, cfg=None, n_paths=10_000, seed=0, *, frame=None, antithetic=False, coarsen=1, threads=None) -> Estimate:
    """(dP_t^V f)(v) from the derivative formula, which differentiates f.

    ``v`` is an ambient tangent vector at x, or None for the full covector in
    the frame at x.
    """
    f = as_scalar_field(m, f)
    if not f.has_df:
        raise ValueError("derivative_formula needs a scalar field with an analytic differential")
    cfg = _cfg(cfg, t)
    frame = start_frame(m, x, frame)
    s = sample(m, x, cfg, n_paths, seed, V, derivative_integrand(f), frame=frame, antithetic=antithetic, coarsen=coarsen, threads=threads)[0]
    if v is not None:
        m.check_tangent(x, v, tol=1e-8)
        s = s @ m.frame_coords(frame, v)
    return _estimate(s, cfg, seed, antithetic, frame=frame)


def divergence_formula(m, x, t, V, alpha: OneFormBundle, cfg=None, n_paths=10_000, seed=0, *, antithetic=False, coarsen=1, threads=None) -> Estimate:
    """P_t^V(d*alpha)(x) without differentiating alpha."""
    cfg = _cfg(cfg, t)
    s = sample(m, x, cfg, n_paths, seed, V, divergence_integrand(alpha, t), antithetic=antithetic, coarsen=coarsen, threads=threads)
    return _estimate(s[0], cfg, seed, antithetic)


def _flow_field(flow, s_param):
    if isinstance(flow, FlowBundle):
        return (lambda p: flow.Y(s_param, p)), (lambda p: flow.divY(s_param, p))
    Y, divY = flow
    return Y, divY


def inside_derivative(m, x, t, V, f, flow, cfg=None, n_paths=10_000, seed=0, *, s=0.0, antithetic=False, coarsen=1, threads=None) -> Estimate:
    """P_t^V(Y(f))(x) without differentiating f.

    ``flow`` is a :class:`FlowBundle` (its field Y_s at parameter ``s`` is used)
    or a pair of callables (Y, divY).
    """
    cfg = _cfg(cfg, t)
    f = as_scalar_field(m, f)
    Y, divY = _flow_field(flow, s)
    red = inside_integrand(f, Y, divY, t, m)
    smp = sample(m, x, cfg, n_paths, seed, V, red, antithetic=antithetic, coarsen=coarsen, threads=threads)
    return _estimate(smp[0], cfg, seed, antithetic)


def directional_field(m, f: ScalarFieldBundle, Y: Callable) -> ScalarFieldBundle:
    """The function Y(f) = df(Y), e.g. as a direct oracle for inside_derivative."""
    return ScalarFieldBundle.from_callable(m, lambda p: np.sum(f.df(p) * Y(p), axis=-1), name=f"Y({f.name})")


# ------------------------------------------------------- finite differences
def fd_starts(m: ModelManifold, x, eps: float, frame=None):
    """Points exp_x(+-eps F_i) with frames transported to them; shape (2n, D)."""
    x = np.asarray(x, dtype=float)
    frame = start_frame(m, x, frame)
    pts, frs = [], []
    for i in range(m.dim):
        for sgn in (1.0, -1.0):
            v = sgn * eps * frame[i]
            pts.append(m.exp_map(x, v))
            frs.append(m.transport(x[None, :], v[None, :], frame))
    return np.array(pts), np.array(frs), frame


def fd_gradient(m, x, t, V, f, cfg=None, n_paths=10_000, seed=0, *, eps=1e-3, frame=None, antithetic=False, coarsen=1, threads=None) -> Estimate:
    """Central differences of P_t^V f along the frame at x with common random numbers."""
    cfg = _cfg(cfg, t)
    f = as_scalar_field(m, f)
    pts, frs, frame = fd_starts(m, x, eps, frame)
    s = sample(m, pts, cfg, n_paths, seed, V, semigroup_integrand(f), frame=frs, antithetic=antithetic, coarsen=coarsen, threads=threads)[..., 0]
    d = (s[0::2] - s[1::2]) / (2.0 * eps)  # (n, n_paths)
    return _estimate(d.T, cfg, seed, antithetic, frame=frame, eps=eps)


# ------------------------------------------------------------ small-time limit
@dataclass
class CharacResult:
    extrapolant: float
    stderr: float
    target: float
    t_grid: np.ndarray
    D: np.ndarray
    D_stderr: np.ndarray
    slope: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        return abs(self.extrapolant - self.target)

    def as_dict(self):
        return {
            "extrapolant": self.extrapolant,
            "stderr": self.stderr,
            "target": self.target,
            "t_grid": self.t_grid.tolist(),
            "D": self.D.tolist(),
            "D_stderr": self.D_stderr.tolist(),
            "slope": self.slope,
        }


def charac_test_field(m: ModelManifold, x, X, alpha: float = 0.0, width: float = 1.0) -> ScalarFieldBundle:
    """f with f(x) = alpha, grad f(x) = X and Hess f(x) = 0.

    Euclidean: alpha + <X, p - x> exp(-|p - x|^2 / (2 width^2)) (bounded).
    Sphere: alpha + <X, p>, whose restriction has vanishing Hessian at x
    because X is orthogonal to x.
    """
    x = np.asarray(x, dtype=float)
    X = m.check_tangent(x, X, tol=1e-10)
    if abs(m.norm(X) - 1.0) > 1e-10:
        raise ValueError("X must be a unit vector")
    if m.kind == "euclidean":
        fld = fields.linear(X, -float(X @ x)) * fields.gaussian(x, width) + alpha
    elif m.kind == "sphere":
        fld = fields.linear(X) + alpha
    else:
        raise ValueError("charac_test_field supports Euclidean space and the sphere")
    return ScalarFieldBundle.from_field(m, fld, name="charac", params={"alpha": alpha, "X": X.tolist()})


def charac_target(m: ModelManifold, x, X, p, V: Optional[PotentialBundle], alpha: float) -> float:
    """1/2 Ric(X, X) + (1 - 1/p) V(x) + alpha dV(X)."""
    X = np.asarray(X, dtype=float)
    ric = float(m.inner(X, m.ricci_apply(X, x)))
    if V is None:
        return 0.5 * ric
    return 0.5 * ric + (1.0 - 1.0 / p) * float(V.V(x)) + alpha * float(np.dot(V.dV(x), X))


def charac_limit(
    m,
    x,
    X,
    p,
    V,
    f: Optional[ScalarFieldBundle] = None,
    t_grid: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
    cfg: Optional[SimConfig] = None,
    n_paths: int = 100_000,
    seed: int = 0,
    *,
    alpha: float = 0.0,
    antithetic: bool = True,
    threads=None,
) -> CharacResult:
    """Small-time limit of D(t) = (P_t^V|grad f|^p - |grad P_t^V f|^p)(x) / (p t).

    D is evaluated on ``t_grid`` (|grad P_t^V f| is the norm of the Bismut
    mean, with a delta-method error) and extrapolated to t = 0 by a weighted
    least-squares fit D(t) = a + b t.  Antithetic pairs are used by default:
    they cancel the O(t^{-1/2}) part of the Bismut weight's variance.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    x = np.asarray(x, dtype=float)
    if f is None:
        f = charac_test_field(m, x, X, alpha)
    alpha = float(f.f(x))
    steps = DEFAULT_STEPS if cfg is None else cfg.steps
    frame = start_frame(m, x)
    ts = np.asarray(sorted(t_grid, reverse=True), dtype=float)
    Ds, Ses = [], []
    for k, t in enumerate(ts):
        c = SimConfig(t, steps)

        def grad_p(s, f=f):
            return (_weight(s) * f.grad_norm(s.x_t) ** p)[:, None]

        red = combine(grad_p, bismut_integrand(f, t))
        smp = sample(m, x, c, n_paths, seed + k, V, red, frame=frame, antithetic=antithetic, threads=threads)[0]

        def g(mu, t=t):
            return (mu[0] - np.linalg.norm(mu[1:]) ** p) / (p * t)

        d, se = delta_method(smp, g, antithetic=antithetic)
        Ds.append(d)
        Ses.append(se)
    D, S = np.array(Ds), np.array(Ses)
    A = np.stack([np.ones_like(ts), ts], axis=1)
    w = 1.0 / np.maximum(S, 1e-300) ** 2
    cov = np.linalg.inv(A.T @ (w[:, None] * A))
    coef = cov @ (A.T @ (w * D))
    return CharacResult(
        extrapolant=float(coef[0]),
        stderr=float(np.sqrt(cov[0, 0])),
        target=charac_target(m, x, X, p, V, alpha),
        t_grid=ts,
        D=D,
        D_stderr=S,
        slope=float(coef[1]),
        diagnostics={"steps": steps, "n_paths": n_paths, "seed": seed, "antithetic": antithetic},
    )
