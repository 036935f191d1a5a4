"""Explicit constants and empirical checks of the gradient, Harnack and
shift-Harnack inequalities.

Each checker estimates both sides of an inequality from one Monte Carlo
ensemble (common paths, so the slack rhs - lhs has a joint delta-method
error) and returns a :class:`BoundReport` with verdict

    pass  iff  lhs <= rhs + margin,
    margin = 3 * stderr(slack) + 2 * |slack_N - slack_2N|,

where the second term comes from a coupled run with half the step size.
L^p kinds add 1e-3 * |lhs| for the quadrature error.

The inequalities are stated for V >= 0.  A potential bounded below by
-c < 0 is handled through P_t^V = e^{ct} P_t^{V+c}: the right-hand sides
pick up the matching power of e^{ct} and H f becomes (H + c) f.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson

from .bundles import FlowBundle, PotentialBundle, ScalarFieldBundle
from .estimators import (
    DEFAULT_STEPS,
    as_scalar_field,
    bismut_integrand,
    combine,
    sample,
    start_frame,
)
from .geometry import ModelManifold
from .potential import kappa_bound
from .results import Estimate, delta_method
from .stochastics import SimConfig

SERIES_CUTOFF = 1e-4
SIMPSON_NODES = 65
QUAD_REL_ERROR = 1e-3
GRADIENT_KINDS = ("voc", "linf", "lp", "uniform_linf", "uniform_lp", "gradestbas")
LP_KINDS = ("lp", "uniform_lp")


# ------------------------------------------------------------------ constants
def default_bdg_root(q):
    """C_q^{1/q} = 2 sqrt(2 q), a conservative Burkholder-Davis-Gundy root."""
    return 2.0 * math.sqrt(2.0 * q)


@dataclass(frozen=True)
class ConstantsConfig:
    """Curvature bounds 2K <= Ric <= 2L and the BDG root q -> C_q^{1/q}."""

    K: float
    L: float
    bdg_root: Callable = default_bdg_root

    def __post_init__(self):
        if self.K > self.L:
            raise ValueError("need K <= L")
        if self.bdg_root(2.0) < math.sqrt(2.0) - 1e-15:
            raise ValueError("a BDG root below sqrt(2) at q = 2 contradicts the Ito isometry")

    @property
    def K_minus(self) -> float:
        return max(0.0, -self.K)

    @classmethod
    def for_manifold(cls, m: ModelManifold, bdg_root: Callable = default_bdg_root):
        K, L = m.ricci_bounds
        return cls(K, L, bdg_root)

    def as_dict(self, q=None):
        out = {"K": self.K, "L": self.L, "K_minus": self.K_minus, "bdg_root": getattr(self.bdg_root, "__name__", "custom")}
        if q is not None:
            out["bdg_root_value"] = self.bdg_root(q)
        return out


def _small(x):
    return abs(x) < SERIES_CUTOFF


def c1(t, K):
    """(e^{2Kt} - 1) / (2Kt)."""
    u = 2.0 * K * t
    if _small(u):
        return 1.0 + u / 2.0 + u**2 / 6.0 + u**3 / 24.0
    return math.expm1(u) / u


def c2(t, K):
    """(Kt/2) coth(Kt/2)."""
    y = 0.5 * K * t
    if _small(K * t):
        return 1.0 + y**2 / 3.0 - y**4 / 45.0 + 2.0 * y**6 / 945.0
    return y / math.tanh(y)


def harnack_constants(t, K):
    if not t > 0:
        raise ValueError("t must be positive")
    return c1(t, K), c2(t, K)


def alpha_bracket(t, L):
    """(e^{Lt} - 1 - Lt) / (L^2 t) = (1/t) int_0^t e^{Ls} (t - s) ds."""
    x = L * t
    if _small(x):
        return t * (0.5 + x / 6.0 + x**2 / 24.0 + x**3 / 120.0)
    return (math.expm1(x) - x) / (L * L * t)


def decay_factor(t, K):
    """(1 - e^{-Kt}) / K, equal to t at K = 0."""
    x = K * t
    if _small(x):
        return t * (1.0 - x / 2.0 + x**2 / 6.0 - x**3 / 24.0)
    return -math.expm1(-x) / K


def _prod(a, b):
    # a * b with 0 * inf = 0 (a vanishing flow kills the gradient term)
    return 0.0 if a == 0.0 or b == 0.0 else a * b


def alpha_const(t, K, L, sup_Y, sup_divY, grad_sup):
    if not t > 0:
        raise ValueError("t must be positive")
    decay = math.exp(-K * t)
    noise = _prod(sup_Y, decay / math.sqrt(t) * math.sqrt(c1(t, L)))
    drift = _prod(sup_Y, _prod(grad_sup, decay * alpha_bracket(t, L)))
    return sup_divY + noise + drift


def beta_const(delta, t, K, L, sup_Y, sup_divY, grad_sup):
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not t > 0:
        raise ValueError("t must be positive")
    decay = math.exp(-K * t)
    noise = _prod(sup_Y**2, decay**2 / (2.0 * t * delta) * c1(t, L))
    drift = _prod(sup_Y, _prod(grad_sup, decay * alpha_bracket(t, L)))
    return sup_divY + noise + drift


# ---------------------------------------------------------- point sets / norms
def fibonacci_sphere(n_points: int, radius: float = 1.0):
    """Near-uniform equal-weight points on the 2-sphere."""
    i = np.arange(n_points)
    z = 1.0 - (2.0 * i + 1.0) / n_points
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    r = np.sqrt(1.0 - z * z)
    return radius * np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def torus_grid(m: ModelManifold, per_axis: int):
    ax = np.arange(per_axis) * (m.scale / per_axis)
    mesh = np.meshgrid(*([ax] * m.dim), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def quadrature_nodes(m: ModelManifold, size: Optional[int] = None):
    """(nodes, weights) integrating over a compact manifold."""
    if m.kind == "torus":
        k = size or 16
        nodes = torus_grid(m, k)
        return nodes, np.full(len(nodes), m.scale**m.dim / len(nodes))
    if m.kind == "sphere" and m.dim == 2:
        k = size or 1000
        return fibonacci_sphere(k, m.scale), np.full(k, 4.0 * math.pi * m.scale**2 / k)
    raise ValueError(f"L^p quadrature is available on tori and the 2-sphere, not on {m}")


def probe_points(m: ModelManifold, center=None, radius: float = 6.0, density: int = 20_000):
    """A dense deterministic point set for sup norms."""
    if m.kind == "torus":
        return torus_grid(m, max(8, int(round(density ** (1.0 / m.dim)))))
    if m.kind == "sphere" and m.dim == 2:
        return fibonacci_sphere(density, m.scale)
    per = max(5, int(round(density ** (1.0 / m.dim))))
    ax = np.linspace(-radius, radius, per)
    mesh = np.meshgrid(*([ax] * m.dim), indexing="ij")
    coords = np.stack([g.ravel() for g in mesh], axis=1)
    if m.kind == "euclidean":
        c = np.zeros(m.dim) if center is None else np.asarray(center, dtype=float)
        return c + coords
    if m.kind == "hyperbolic":
        base = m.base_point() if center is None else np.asarray(center, dtype=float)
        frame = m.frame_at(base)
        return m.exp_map(np.broadcast_to(base, (len(coords), m.ambient_dim)), coords @ frame)
    # higher-dimensional spheres: random directions with a fixed seed
    rng = np.random.default_rng(12345)
    return m.project_point(rng.standard_normal((density, m.ambient_dim)))


def sup_norm(fn, probe):
    return float(np.max(np.abs(fn(probe))))


def shift_of(V: Optional[PotentialBundle]) -> float:
    """c = max(0, -inf V), so that V + c >= 0."""
    if V is None:
        return 0.0
    if not np.isfinite(V.inf_V):
        raise ValueError("the inequalities need a potential bounded below")
    return max(0.0, -float(V.inf_V))


# -------------------------------------------------------------------- reports
def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class BoundReport:
    name: str
    lhs: Estimate
    rhs: object  # float or Estimate
    slack: float
    margin: float
    stderr: float = 0.0
    bias: float = 0.0
    inputs: dict = field(default_factory=dict)

    @property
    def rhs_value(self) -> float:
        return self.rhs.mean if isinstance(self.rhs, Estimate) else float(self.rhs)

    @property
    def verdict(self) -> str:
        ok = np.isfinite(self.slack) and np.isfinite(self.margin) and self.lhs.mean <= self.rhs_value + self.margin
        return "pass" if ok else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        rhs = self.rhs.as_dict() if isinstance(self.rhs, Estimate) else {"mean": self.rhs_value, "stderr": 0.0}
        return _jsonable(
            {
                "name": self.name,
                "lhs": self.lhs.as_dict(),
                "rhs": rhs,
                "slack": self.slack,
                "margin": self.margin,
                "slack_stderr": self.stderr,
                "bias_allowance": self.bias,
                "verdict": self.verdict,
                "inputs": self.inputs,
            }
        )


@dataclass
class Scenario:
    """Everything a checker needs; unused fields may stay None."""

    m: ModelManifold
    x: np.ndarray  # one point (D,) or several (P, D)
    t: float
    V: Optional[PotentialBundle]
    f: ScalarFieldBundle
    steps: int = DEFAULT_STEPS
    n_paths: int = 4000
    seed: int = 0
    p: Optional[float] = None
    delta: Optional[float] = None
    probe: Optional[np.ndarray] = None
    quad_size: Optional[int] = None
    constants: Optional[ConstantsConfig] = None
    refine: bool = True
    antithetic: bool = False
    threads: Optional[int] = None

    def __post_init__(self):
        self.f = as_scalar_field(self.m, self.f)
        self.x = np.asarray(self.x, dtype=float)
        if self.constants is None:
            self.constants = ConstantsConfig.for_manifold(self.m)

    @property
    def points(self):
        return np.atleast_2d(self.x)

    @property
    def cfg(self):
        return SimConfig(self.t, self.steps)

    def probe_set(self):
        if self.probe is not None:
            return np.asarray(self.probe, dtype=float)
        center = None if self.m.is_compact else self.points[0]
        return probe_points(self.m, center)

    def echo(self) -> dict:
        return {
            "manifold": {"kind": self.m.kind, "dim": self.m.dim, "scale": self.m.scale},
            "x": self.x,
            "t": self.t,
            "potential": None if self.V is None else self.V.describe(),
            "field": self.f.describe(),
            "steps": self.steps,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "antithetic": self.antithetic,
            "refine": self.refine,
        }


def _run(scn: Scenario, starts, reducer, frames=None):
    """Samples (n_paths, P*k) at N steps, and the coupled 2N-step samples."""
    kw = dict(frame=frames, antithetic=scn.antithetic, threads=scn.threads)
    cfg = scn.cfg
    if not scn.refine:
        s = sample(scn.m, starts, cfg, scn.n_paths, scn.seed, scn.V, reducer, **kw)
        return _flat(s), None
    coarse = sample(scn.m, starts, cfg, scn.n_paths, scn.seed, scn.V, reducer, coarsen=2, **kw)
    fine = sample(scn.m, starts, cfg.with_steps(2 * cfg.steps), scn.n_paths, scn.seed, scn.V, reducer, **kw)
    return _flat(coarse), _flat(fine)


def _flat(s):
    # (P, n, k) -> (n, P*k), columns grouped by starting point
    P, n, k = s.shape
    return np.transpose(s, (1, 0, 2)).reshape(n, P * k)


@dataclass
class _Sides:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    slack: float
    slack_se: float


def _sides(samples, lhs_fn, rhs_fn, antithetic, lhs_grad=None) -> _Sides:
    """Both sides and the slack rhs - lhs with joint delta-method errors.

    ``lhs_grad`` (analytic gradient of lhs_fn) is only used when the right
    side does not depend on the samples, as for the L^p kinds.
    """
    lhs, lse = delta_method(samples, lhs_fn, antithetic, grad=lhs_grad)
    rhs, rse = delta_method(samples, rhs_fn, antithetic)
    if lhs_grad is not None and rse == 0.0:
        slack, sse = rhs - lhs, lse
    else:
        slack, sse = delta_method(samples, lambda mu: rhs_fn(mu) - lhs_fn(mu), antithetic)
    return _Sides(lhs, lse, rhs, rse, slack, sse)


def _report(name, scn: Scenario, coarse: _Sides, fine: Optional[_Sides], inputs, extra_margin=0.0, rhs_random=True):
    bias = 0.0 if fine is None else 2.0 * abs(coarse.slack - fine.slack)
    margin = 3.0 * coarse.slack_se + bias + extra_margin
    lhs = Estimate(coarse.lhs, coarse.lhs_se, scn.n_paths, scn.cfg, scn.seed)
    rhs = Estimate(coarse.rhs, coarse.rhs_se, scn.n_paths, scn.cfg, scn.seed) if rhs_random else coarse.rhs
    info = scn.echo()
    info.update(inputs)
    if fine is not None:
        info["refined"] = {"lhs": fine.lhs, "rhs": fine.rhs, "slack": fine.slack, "steps": 2 * scn.steps}
    return BoundReport(name, lhs, rhs, coarse.slack, margin, coarse.slack_se, bias, info)


# --------------------------------------------------------- gradient estimates
def _needs_p(scn):
    if scn.p is None or not scn.p > 1:
        raise ValueError("L^p kinds need p > 1")
    return scn.p, scn.p / (scn.p - 1.0)


def _sup_f(scn):
    return scn.f.sup_f if scn.f.sup_f is not None else sup_norm(scn.f.f, scn.probe_set())


def _sup_Hf(scn, c):
    V = scn.V
    probe = scn.probe_set()

    def Hc(p):
        vv = 0.0 if V is None else V.V(p)
        return -0.5 * scn.f.laplacian_f(p) + (vv + c) * scn.f.f(p)

    return sup_norm(Hc, probe)


def _gradient_rhs(kind, scn: Scenario, c):
    """Deterministic right-hand side and the inputs it was built from."""
    t, m, V = scn.t, scn.m, scn.V
    cc = scn.constants
    Km = cc.K_minus
    info = {"kind": kind, "shift": c, "constants": cc.as_dict()}
    if kind == "voc":
        if V is None:
            sup_v, inf_v = 0.0, 0.0
        else:
            sup_v, inf_v = float(V.sup_abs), float(V.inf_V)
        if not np.isfinite(sup_v):
            raise ValueError("voc needs a bounded potential")
        sup_f = _sup_f(scn)
        rhs = math.sqrt(2.0 / (math.pi * t)) * math.exp(Km * t) * (1.0 + 2.0 * t * sup_v * math.exp(-t * min(inf_v, 0.0))) * sup_f
        info.update(sup_f=sup_f, sup_V=sup_v, inf_V=inf_v)
        return rhs, info
    if kind == "linf":
        kap, src = _kappa(scn, t)
        sup_f = _sup_f(scn)
        rhs = math.exp(c * t) * math.exp(Km * t) * (math.sqrt(2.0 / (math.pi * t)) + kap) * sup_f
        info.update(sup_f=sup_f, kappa=kap, kappa_source=src)
        return rhs, info
    if kind == "uniform_linf":
        d = scn.delta or t
        kap, src = _kappa(scn, d)
        sup_f, sup_h = _sup_f(scn), _sup_Hf(scn, c)
        rhs = math.exp(c * t) * math.exp(Km * d) * (
            (math.sqrt(2.0 / (math.pi * d)) + kap) * sup_f + d * (math.sqrt(8.0 / (math.pi * d)) + kap) * sup_h
        )
        info.update(delta=d, sup_f=sup_f, sup_Hf=sup_h, kappa=kap, kappa_source=src)
        return rhs, info
    if kind in LP_KINDS:
        p, q = _needs_p(scn)
        nodes, w = quadrature_nodes(m, scn.quad_size)
        root = cc.bdg_root(q)
        f_p = float(np.sum(w * np.abs(scn.f.f(nodes)) ** p) ** (1.0 / p))
        info.update(p=p, q=q, norm_f_p=f_p, quad_nodes=len(nodes), constants=cc.as_dict(q))
        if kind == "lp":
            kap, src = _kappa(scn, t, q)
            rhs = math.exp(c * t) * math.exp(Km * t) * (root / math.sqrt(t) + kap) * f_p
            info.update(kappa_q=kap, kappa_source=src)
            return rhs, info
        d = scn.delta or t
        kap, src = _kappa(scn, d, q)
        vv = 0.0 if V is None else V.V(nodes)
        hf = -0.5 * scn.f.laplacian_f(nodes) + (vv + c) * scn.f.f(nodes)
        hf_p = float(np.sum(w * np.abs(hf) ** p) ** (1.0 / p))
        rhs = math.exp(c * t) * math.exp(Km * d) * (
            (root / math.sqrt(d) + kap) * f_p + d * (2.0 * root / math.sqrt(d) + kap) * hf_p
        )
        info.update(delta=d, norm_Hf_p=hf_p, kappa_q=kap, kappa_source=src)
        return rhs, info
    raise ValueError(f"unknown gradient bound kind {kind!r}")


def _kappa(scn, t, q=None):
    if scn.V is None or scn.V.is_constant:
        return 0.0, "constant potential"
    return kappa_bound(scn.m, t, scn.V, q=q, probe=scn.points, cfg=SimConfig(t, scn.steps), seed=scn.seed)


def check_gradient_bounds(kinds: Sequence[str], scn: Scenario) -> list:
    """Reports for several gradient-bound kinds sharing one ensemble per family."""
    kinds = list(kinds)
    for k in kinds:
        if k not in GRADIENT_KINDS:
            raise ValueError(f"unknown gradient bound kind {k!r}; expected one of {GRADIENT_KINDS}")
    if any(k in LP_KINDS for k in kinds) and not scn.m.is_compact:
        raise ValueError("L^p gradient bounds need a compact manifold")
    c = shift_of(scn.V)
    reports = []
    point_kinds = [k for k in kinds if k not in LP_KINDS]
    if point_kinds:
        reports += _pointwise(point_kinds, scn, c)
    lp = [k for k in kinds if k in LP_KINDS]
    if lp:
        reports += _lp(lp, scn, c)
    order = {k: i for i, k in enumerate(kinds)}
    return sorted(reports, key=lambda r: order[r.inputs["kind"]])


def check_gradient_bound(kind: str, scn: Scenario) -> BoundReport:
    return check_gradient_bounds([kind], scn)[0]


def _pointwise(kinds, scn: Scenario, c):
    m, f, n = scn.m, scn.f, scn.m.dim
    pts = scn.points
    frames = start_frame(m, pts)
    t = scn.t

    def gnorm(s):
        return (s.weight * f.grad_norm(s.x_t))[:, None]

    def fabs(s):
        return (s.weight * np.abs(f.f(s.x_t)))[:, None]

    red = combine(bismut_integrand(f, t), gnorm, fabs)
    k = n + 2
    coarse, fine = _run(scn, pts, red, frames)
    K = scn.constants.K
    grad_sup = 0.0 if scn.V is None else float(scn.V.grad_sup)
    reports = []
    for kind in kinds:
        if kind == "gradestbas":
            if not np.isfinite(grad_sup):
                raise ValueError("gradestbas needs a bounded grad V")
            fac = decay_factor(t, K)
            rhs_const, info = None, {"kind": kind, "decay_factor": fac, "grad_sup": grad_sup, "constants": scn.constants.as_dict()}
        else:
            rhs_const, info = _gradient_rhs(kind, scn, c)
        per_point = []
        for j in range(len(pts)):
            cols = slice(j * k, (j + 1) * k)

            def lhs_fn(mu):
                return float(np.linalg.norm(mu[:n]))

            if rhs_const is None:
                def rhs_fn(mu):
                    return math.exp(-K * t) * mu[n] + grad_sup * fac * mu[n + 1]
            else:
                def rhs_fn(mu, r=rhs_const):
                    return r

            sides = [None if s is None else _sides(s[:, cols], lhs_fn, rhs_fn, scn.antithetic) for s in (coarse, fine)]
            rep = _report(
                f"gradient:{kind}",
                scn,
                sides[0],
                sides[1],
                dict(info, point=pts[j]),
                rhs_random=rhs_const is None,
            )
            per_point.append(rep)
        worst = min(per_point, key=lambda r: r.slack + r.margin)
        worst.inputs["points"] = pts
        worst.inputs["per_point"] = [
            {"slack": r.slack, "margin": r.margin, "verdict": r.verdict} for r in per_point
        ]
        worst.inputs["all_pass"] = all(r.passed for r in per_point)
        reports.append(worst)
    return reports


def _lp(kinds, scn: Scenario, c):
    m, f, n = scn.m, scn.f, scn.m.dim
    p, q = _needs_p(scn)
    nodes, w = quadrature_nodes(m, scn.quad_size)
    frames = start_frame(m, nodes)
    coarse, fine = _run(scn, nodes, bismut_integrand(f, scn.t), frames)
    P = len(nodes)

    def lhs_fn(mu):
        g = np.linalg.norm(mu.reshape(P, n), axis=1)
        return float(np.sum(w * g**p) ** (1.0 / p))

    def lhs_grad(mu):
        v = mu.reshape(P, n)
        g = np.linalg.norm(v, axis=1)
        L = np.sum(w * g**p) ** (1.0 / p)
        if L == 0:
            return np.zeros_like(mu)
        coef = L ** (1.0 - p) * w * np.where(g > 0, g ** (p - 2.0), 0.0)
        return (coef[:, None] * v).ravel()

    reports = []
    for kind in kinds:
        rhs_const, info = _gradient_rhs(kind, scn, c)

        def rhs_fn(mu, r=rhs_const):
            return r

        sides = [None if s is None else _sides(s, lhs_fn, rhs_fn, scn.antithetic, lhs_grad=lhs_grad) for s in (coarse, fine)]
        extra = QUAD_REL_ERROR * abs(sides[0].lhs)
        rep = _report(f"gradient:{kind}", scn, sides[0], sides[1], info, extra_margin=extra, rhs_random=False)
        reports.append(rep)
    return reports


# --------------------------------------------------------------------- Harnack
def check_harnack_family(m, x, y, ps: Sequence[float], t, V, f, cfg=None, n_paths=4000, seed=0, *, refine=True, antithetic=False, constants=None, threads=None):
    """One Harnack report per exponent p, all from one ensemble."""
    ps = [float(p) for p in ps]
    if any(not p > 1 for p in ps):
        raise ValueError("Harnack exponents must exceed 1")
    steps = DEFAULT_STEPS if cfg is None else cfg.steps
    scn = Scenario(m, x, t, V, f, steps, n_paths, seed, refine=refine, antithetic=antithetic, constants=constants, threads=threads)
    grad_sup = 0.0 if V is None else float(V.grad_sup)
    if not np.isfinite(grad_sup):
        raise ValueError("Harnack inequality needs a bounded grad V")
    f = scn.f
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = shift_of(V)
    K = scn.constants.K
    C1, C2 = harnack_constants(t, K)
    rho = float(m.distance(x, y))

    def red(s):
        fx = f.f(s.x_t)
        if np.any(fx < 0):
            raise ValueError("Harnack inequality needs f >= 0")
        cols = [s.weight * fx] + [s.weight * fx**p for p in ps]
        return np.stack(cols, axis=1)

    k = 1 + len(ps)
    coarse, fine = _run(scn, np.stack([x, y]), red)
    reports = []
    for i, p in enumerate(ps):
        expo = p * rho**2 / (2.0 * (p - 1.0) * C1 * t) + _prod(t * rho, grad_sup) / (2.0 * C2)
        factor = math.exp(expo + (p - 1.0) * c * t)

        def lhs_fn(mu, p=p):
            return max(mu[0], 0.0) ** p

        def rhs_fn(mu, i=i, factor=factor):
            return mu[k + 1 + i] * factor

        sides = [None if s is None else _sides(s, lhs_fn, rhs_fn, antithetic) for s in (coarse, fine)]
        info = {
            "kind": "harnack",
            "y": y,
            "p": p,
            "rho": rho,
            "C1": C1,
            "C2": C2,
            "grad_sup": grad_sup,
            "shift": c,
            "exponent": expo,
            "constants": scn.constants.as_dict(),
        }
        reports.append(_report("harnack", scn, sides[0], sides[1], info))
    return reports


def check_harnack(m, x, y, p, t, V, f, cfg=None, n_paths=4000, seed=0, **kw) -> BoundReport:
    """(P_t^V f)^p(x) <= P_t^V f^p(y) exp[p rho^2 / (2(p-1) C1 t) + t rho |grad V|_inf / (2 C2)]."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    return check_harnack_family(m, x, y, [p], t, V, f, cfg, n_paths, seed, **kw)[0]


# --------------------------------------------------------------- shift Harnack
def _simpson(fn):
    s = np.linspace(0.0, 1.0, SIMPSON_NODES)
    return float(simpson(np.array([fn(v) for v in s]), x=s))


def _flow_norms(flow: FlowBundle):
    if not (np.isfinite(flow.sup_Y) and np.isfinite(flow.sup_divY)):
        raise ValueError("shift-Harnack needs a flow with bounded Y and div Y")
    return flow.sup_Y, flow.sup_divY


def check_shift_harnack(form, m, x, flow: FlowBundle, p, t, V, f, cfg=None, n_paths=4000, seed=0, *, refine=True, antithetic=False, constants=None, threads=None) -> BoundReport:
    """Shift-Harnack inequality in its quadratic or log form."""
    if form not in ("quadratic", "log"):
        raise ValueError("form must be 'quadratic' or 'log'")
    if form == "log" and (p is None or not p > 1):
        raise ValueError("the log form needs p > 1")
    steps = DEFAULT_STEPS if cfg is None else cfg.steps
    scn = Scenario(m, x, t, V, f, steps, n_paths, seed, p=p, refine=refine, antithetic=antithetic, constants=constants, threads=threads)
    f = scn.f
    c = shift_of(V)
    cc = scn.constants
    grad_sup = 0.0 if V is None else float(V.grad_sup)
    sup_Y, sup_div = _flow_norms(flow)

    def f_checked(pts):
        v = f.f(pts)
        if np.any(v < 0) or (form == "log" and np.any(v <= 0)):
            raise ValueError("shift-Harnack needs f >= 0 (f > 0 for the log form)")
        return v

    info = {
        "kind": f"shift_harnack:{form}",
        "flow": flow.describe(),
        "sup_Y": sup_Y,
        "sup_divY": sup_div,
        "grad_sup": grad_sup,
        "shift": c,
        "constants": cc.as_dict(),
        "simpson_nodes": SIMPSON_NODES,
    }
    if form == "quadratic":
        a2 = _simpson(lambda s: alpha_const(t, cc.K, cc.L, sup_Y, sup_div, grad_sup) ** 2)
        coef = math.sqrt(a2) * math.exp(0.5 * c * t)

        def red(s):
            fx = f_checked(s.x_t)
            shifted = f_checked(flow.F(1.0, s.x_t))
            return np.stack([s.weight * fx, s.weight * shifted, s.weight * fx**2], axis=1)

        def lhs_fn(mu):
            return mu[0]

        def rhs_fn(mu):
            return mu[1] + coef * math.sqrt(max(mu[2], 0.0))

        info.update(alpha_sq_integral=a2, coefficient=coef)
    else:
        def integrand(s):
            b = 1.0 + (p - 1.0) * s
            return p / b * beta_const((p - 1.0) / b, t, cc.K, cc.L, sup_Y, sup_div, grad_sup)

        expo = _simpson(integrand)
        factor = math.exp(expo + (p - 1.0) * c * t)

        def red(s):
            fx = f_checked(s.x_t)
            shifted = f_checked(flow.F(1.0, s.x_t))
            return np.stack([s.weight * fx, s.weight * shifted**p], axis=1)

        def lhs_fn(mu):
            return max(mu[0], 0.0) ** p

        def rhs_fn(mu):
            return mu[1] * factor

        info.update(p=p, exponent=expo, factor=factor)
    coarse, fine = _run(scn, np.atleast_2d(scn.x), red)
    sides = [None if s is None else _sides(s, lhs_fn, rhs_fn, antithetic) for s in (coarse, fine)]
    return _report(f"shift_harnack:{form}", scn, sides[0], sides[1], info)


# ---------------------------------------------------------------- oracle check
def check_against_oracle(name, estimate, target, steps, *, refine=True, inputs=None) -> BoundReport:
    """|est_N - target| <= 3 stderr + 2 |est_N - est_2N|.

    ``estimate(steps, coarsen)`` returns an :class:`Estimate`; the N-step run
    uses coarsen=2 so that it shares its Brownian increments with the 2N run.
    """
    coarse = estimate(steps, 2 if refine else 1)
    fine = estimate(2 * steps, 1) if refine else None
    err = abs(float(coarse.mean) - float(target))
    bias = 0.0 if fine is None else 2.0 * abs(float(coarse.mean) - float(fine.mean))
    margin = 3.0 * float(coarse.stderr) + bias
    info = dict(inputs or {})
    info.update(target=float(target), estimate=coarse.as_dict(), steps=steps)
    if fine is not None:
        info["refined"] = fine.as_dict()
    lhs = Estimate(err, float(coarse.stderr), coarse.n_paths, coarse.cfg, coarse.seed)
    return BoundReport(name, lhs, 0.0, -err, margin, float(coarse.stderr), bias, info)
