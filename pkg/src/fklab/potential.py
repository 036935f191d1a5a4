"""Potentials, the Feynman-Kac weight and the kappa functionals.

kappa_V(t) = sup_x E[ int_0^t |dV|(X_s(x)) ds ] and its L^q version
kappa_{V,q}(t) = sup_x E[ (int_0^t |dV|(X_s(x)) ds)^q ]^{1/q} control every
gradient bound.  A supremum over M is not computable, so the Monte Carlo
routines estimate the expectation at given points and report the analytic
bound t * ||grad V||_inf next to it.
"""
from __future__ import annotations

import numpy as np

from . import fields
from .bundles import PotentialBundle
from .geometry import ModelManifold
from .results import Estimate, delta_method
from .stochastics import PathRecord, SimConfig, run_ensemble


# ------------------------------------------------------------------- library
def zero(m: ModelManifold) -> PotentialBundle:
    return constant(m, 0.0)


def constant(m: ModelManifold, value: float = 1.0) -> PotentialBundle:
    value = float(value)
    return PotentialBundle(
        m, fields.constant(value), value, 0.0, abs(value), "constant", {"value": value}
    )


def linear(m: ModelManifold, a) -> PotentialBundle:
    """V(x) = <a, x> on Euclidean space; unbounded below."""
    if m.kind != "euclidean":
        raise ValueError("the linear potential is only defined on Euclidean space")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (m.dim,):
        raise ValueError(f"slope needs {m.dim} components")
    grad = float(np.linalg.norm(a))
    inf_v = 0.0 if grad == 0 else -np.inf
    return PotentialBundle(m, fields.linear(a), inf_v, grad, np.inf if grad else 0.0, "linear", {"a": a.tolist()})


def harmonic(m: ModelManifold) -> PotentialBundle:
    """V(x) = |x|^2 / 2 on Euclidean space; grad V is unbounded."""
    if m.kind != "euclidean":
        raise ValueError("the harmonic potential is only defined on Euclidean space")
    return PotentialBundle(m, fields.quadratic(np.eye(m.dim)), 0.0, np.inf, np.inf, "harmonic", {})


def trig(m: ModelManifold, a: float = 1.0, b: float = 1.0, offset: float = 0.0) -> PotentialBundle:
    """V = a sin(k p_1) + b cos(k p_2) + offset in ambient coordinates.

    k = 1 except on the torus, where k = 2 pi / L keeps V periodic.  The
    cosine term is dropped in ambient dimension one.
    """
    D = m.ambient_dim
    k = 2.0 * np.pi / m.scale if m.kind == "torus" else 1.0
    e1 = np.zeros(D)
    e1[0] = k
    fld = a * fields.compose("sin", fields.linear(e1))
    amp = abs(a)
    grad2 = a**2
    if D >= 2:
        e2 = np.zeros(D)
        e2[1] = k
        fld = fld + b * fields.compose("cos", fields.linear(e2))
        amp += abs(b)
        grad2 += b**2
    else:
        b = 0.0
    fld = fld + offset
    grad_sup = np.inf if m.kind == "hyperbolic" else k * float(np.sqrt(grad2))
    return PotentialBundle(
        m,
        fld,
        offset - amp,
        grad_sup,
        abs(offset) + amp,
        "trig",
        {"a": a, "b": b, "offset": offset},
    )


# ------------------------------------------------------------- path functions
def fk_weight(path: PathRecord, V: PotentialBundle):
    """exp(-int_0^t V(X_s) ds) with the trapezoidal rule; batched records allowed."""
    vals = V.V(path.points)
    h = np.diff(path.times)
    return np.exp(-np.sum(0.5 * h * (vals[..., 1:] + vals[..., :-1]), axis=-1))


# ------------------------------------------------------------------- kappas
def _dv_abs_samples(m, x, V, cfg, n_paths, seed):
    return run_ensemble(m, x, cfg, n_paths, seed, lambda s: s.dv_abs, V)[..., 0]


def _needs_ensemble(V, n_paths):
    if n_paths is None and not np.isfinite(V.grad_sup):
        raise ValueError("kappa unavailable: grad V is unbounded and no ensemble was given")


def kappa_v(m, x, t, V: PotentialBundle, cfg: SimConfig = None, n_paths=None, seed=0) -> Estimate:
    """E[int_0^t |dV|(X_s(x)) ds] at x; ``extra['analytic_bound']`` = t ||grad V||_inf."""
    _needs_ensemble(V, n_paths)
    analytic = t * V.grad_sup
    if V.is_constant or n_paths is None:
        return Estimate(0.0 if V.is_constant else analytic, 0.0, 0, cfg, seed, {"analytic_bound": analytic})
    cfg = (cfg or SimConfig(t, 100)).with_t(t)
    z = _dv_abs_samples(m, x, V, cfg, n_paths, seed)[0]
    return Estimate.from_samples(z, cfg, seed, analytic_bound=analytic)


def kappa_vq(m, x, t, q, V: PotentialBundle, cfg: SimConfig = None, n_paths=None, seed=0) -> Estimate:
    """E[(int_0^t |dV|(X_s(x)) ds)^q]^{1/q} at x, delta-method standard error."""
    if not q > 1:
        raise ValueError("q must exceed 1")
    _needs_ensemble(V, n_paths)
    analytic = t * V.grad_sup
    if V.is_constant or n_paths is None:
        return Estimate(0.0 if V.is_constant else analytic, 0.0, 0, cfg, seed, {"analytic_bound": analytic})
    cfg = (cfg or SimConfig(t, 100)).with_t(t)
    z = _dv_abs_samples(m, x, V, cfg, n_paths, seed)[0]
    mean, se = delta_method(z[:, None] ** q, lambda mu: max(mu[0], 0.0) ** (1.0 / q))
    return Estimate(mean, se, len(z), cfg, seed, {"analytic_bound": analytic})


def kappa_bound(m, t, V: PotentialBundle, q=None, probe=None, cfg=None, n_paths=2000, seed=0):
    """A value to use for kappa_V(t) (or kappa_{V,q}(t)) on the right of a bound.

    The analytic bound t ||grad V||_inf when it is finite; otherwise the largest
    upper 3-sigma estimate over the probe points, which is only a lower
    estimate of the supremum and is flagged as such.
    """
    if np.isfinite(V.grad_sup):
        return t * V.grad_sup, "analytic"
    if probe is None:
        raise ValueError("kappa unavailable: grad V is unbounded and no probe points were given")
    cfg = (cfg or SimConfig(t, 100)).with_t(t)
    z = _dv_abs_samples(m, probe, V, cfg, n_paths, seed)
    if q is not None:
        z = z**q
    mean = z.mean(axis=1)
    se = z.std(axis=1, ddof=1) / np.sqrt(z.shape[1])
    best = float(np.max(mean + 3 * se))
    if q is not None:
        best = best ** (1.0 / q)
    return best, "probe-set lower estimate"
