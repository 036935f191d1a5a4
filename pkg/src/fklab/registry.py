"""Named bundles and experiment configs.

A config is a flat ``key = value`` text file (``#`` starts a comment).  Keys:

    manifold  = euclidean | sphere | hyperbolic | torus
    dim, scale
    potential = zero | constant | linear | harmonic | trig
    potential.value / potential.a / potential.b / potential.offset
    field     = one | constant | gaussian | bump | linear | charac
    field.value / field.center / field.sigma / field.offset / field.a
    field.window          radius of a smooth super-Gaussian window (0 = none)
    form      = exact | constant | killing   (form.u; exact forms dF take F from form.field.*)
    flow      = identity | translation | rotation   (flow.u, flow.angle, flow.plane)
    x, y      = comma-separated ambient coordinates (y: several points split by ";")
    points    = x1; x2; ...  or  points.random = k (points.seed)
    t, t_grid, q, delta, eps, steps, n_paths, seed, antithetic, refine
    p                     one exponent, or a comma list (Harnack checks use all of them)
    independent_seeds     the k-th listed estimate uses seed + k (default: all share seed)
    oracle    = mehler | linear_potential   (adds oracle / abs_error columns to sweeps)
    charac.X, charac.alpha, derivative.v
    quad.size, pde.dx, pde.dt, pde.A
    estimates = comma list of estimate names (see ESTIMATES)
    checks    = comma list, e.g. gradient:linf, harnack, shift_harnack:log, oracle:mehler
    out_csv, out_json, out_grid
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import fields, potential
from .bundles import FlowBundle, OneFormBundle, PotentialBundle, ScalarFieldBundle
from .geometry import KINDS, ModelManifold

ESTIMATES = (
    "semigroup",
    "bismut_gradient",
    "derivative_formula",
    "fd_gradient",
    "divergence_formula",
    "divergence_direct",
    "inside_derivative",
    "inside_direct",
    "kappa_v",
    "kappa_vq",
    "charac_limit",
    "pde_reference",
    "mehler",
    "linear_potential_value",
    "q_closed_form",
    "q_deviation",
    "constants",
)
POTENTIALS = ("zero", "constant", "linear", "harmonic", "trig")
FIELDS = ("one", "constant", "gaussian", "bump", "linear", "charac")
FORMS = ("exact", "constant", "killing")
FLOWS = ("identity", "translation", "rotation")
GRADIENT_CHECKS = ("voc", "linf", "lp", "uniform_linf", "uniform_lp", "gradestbas")
ORACLES = ("mehler", "linear_potential")

KNOWN_KEYS = {
    "manifold", "dim", "scale", "potential", "field", "form", "flow", "x", "y", "points",
    "t", "t_grid", "p", "q", "delta", "eps", "steps", "n_paths", "seed", "antithetic", "refine",
    "estimates", "checks", "independent_seeds", "out_csv", "out_json", "out_grid", "oracle",
}
KNOWN_PREFIXES = ("potential.", "field.", "form.", "flow.", "points.", "charac.", "derivative.", "quad.", "pde.")


class ConfigError(ValueError):
    """Raised for any unusable configuration; the CLI maps it to exit code 2."""


# -------------------------------------------------------------------- parsing
def parse_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _float(raw: dict, key: str, default=None) -> Optional[float]:
    if key not in raw:
        return default
    try:
        return float(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw[key]!r}") from None


def _int(raw: dict, key: str, default=None) -> Optional[int]:
    if key not in raw:
        return default
    try:
        v = float(raw[key])
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw[key]!r}") from None
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {raw[key]!r}")
    return int(v)


def _bool(raw: dict, key: str, default=False) -> bool:
    if key not in raw:
        return default
    v = raw[key].lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw[key]!r}")


def _vector(text: str, key: str) -> np.ndarray:
    try:
        return np.array([float(s) for s in re.split(r"[,\s]+", text.strip()) if s], dtype=float)
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}") from None


def _vec(raw, key, default=None):
    return default if key not in raw else _vector(raw[key], key)


def _names(raw, key):
    return [s.strip() for s in raw.get(key, "").split(",") if s.strip()]


# ------------------------------------------------------------------- builders
def build_manifold(raw: dict) -> ModelManifold:
    kind = raw.get("manifold", "euclidean")
    if kind not in KINDS:
        raise ConfigError(f"unknown manifold {kind!r}; expected one of {KINDS}")
    dim = _int(raw, "dim", 1)
    scale = _float(raw, "scale", 2 * math.pi if kind == "torus" else 1.0)
    try:
        return ModelManifold(kind, dim, scale)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_potential(m: ModelManifold, raw: dict) -> PotentialBundle:
    name = raw.get("potential", "zero")
    try:
        if name == "zero":
            return potential.zero(m)
        if name == "constant":
            return potential.constant(m, _float(raw, "potential.value", 1.0))
        if name == "linear":
            return potential.linear(m, _vec(raw, "potential.a", np.ones(m.dim)))
        if name == "harmonic":
            return potential.harmonic(m)
        if name == "trig":
            return potential.trig(
                m,
                _float(raw, "potential.a", 1.0),
                _float(raw, "potential.b", 1.0),
                _float(raw, "potential.offset", 0.0),
            )
    except ValueError as exc:
        raise ConfigError(f"potential {name!r}: {exc}") from None
    raise ConfigError(f"unknown potential {name!r}; expected one of {POTENTIALS}")


def window_field(center, radius: float, power: int = 8) -> fields.AmbientField:
    """exp(-(|p - c|^2 / r^2)^power): equal to 1 up to (|p - c|/r)^{2 power} near c."""
    c = np.asarray(center, dtype=float)
    q = fields.quadratic(2.0 * np.eye(c.size) / radius**2, c)  # |p - c|^2 / r^2
    qq = q
    for _ in range(power - 1):
        qq = qq * q
    w = fields.compose("exp", -1.0 * qq)
    return fields.AmbientField(w.value, w.grad, w.hess, f"window(r={radius:g})")


def _field_spec(m: ModelManifold, raw: dict, prefix: str, x):
    """An AmbientField and its sup norm (None if unknown) from field.* keys."""
    name = raw.get(prefix, "one")
    D = m.ambient_dim
    center = _vec(raw, f"{prefix}.center", x)
    if center is not None and center.shape != (D,):
        raise ConfigError(f"{prefix}.center needs {D} coordinates")
    offset = _float(raw, f"{prefix}.offset", 0.0)
    sigma = _float(raw, f"{prefix}.sigma", 0.7)
    if name in ("one", "constant"):
        val = 1.0 if name == "one" else _float(raw, f"{prefix}.value", 1.0)
        return fields.constant(val), abs(val), {"value": val}
    if name == "gaussian":
        return fields.gaussian(center, sigma) + offset, 1.0 + abs(offset), {"center": center.tolist(), "sigma": sigma, "offset": offset}
    if name == "bump":
        if m.kind == "torus":
            fld = fields.periodic_bump(center, sigma, m.scale)
        else:
            fld = fields.gaussian(center, sigma)
        return fld + offset, 1.0 + abs(offset), {"center": center.tolist(), "sigma": sigma, "offset": offset}
    if name == "linear":
        a = _vec(raw, f"{prefix}.a", None)
        if a is None or a.shape != (D,):
            raise ConfigError(f"{prefix}.a needs {D} coordinates")
        return fields.linear(a, offset), None, {"a": a.tolist(), "offset": offset}
    raise ConfigError(f"unknown field {name!r}; expected one of {FIELDS}")


def build_field(m: ModelManifold, raw: dict, x) -> ScalarFieldBundle:
    from .estimators import charac_test_field

    name = raw.get("field", "one")
    if name == "charac":
        X = _vec(raw, "charac.X", None)
        if X is None:
            raise ConfigError("field = charac needs charac.X")
        try:
            return charac_test_field(m, x, X, _float(raw, "charac.alpha", 0.0), _float(raw, "field.sigma", 1.0))
        except ValueError as exc:
            raise ConfigError(f"field charac: {exc}") from None
    fld, sup, params = _field_spec(m, raw, "field", x)
    radius = _float(raw, "field.window", 0.0)
    if radius > 0:
        if m.kind != "euclidean":
            raise ConfigError("field.window is only used on Euclidean space")
        fld = fld * window_field(x, radius)
        params = dict(params, window=radius)
    return ScalarFieldBundle.from_field(m, fld, name=name, params=params, sup_f=sup)


def build_flow(m: ModelManifold, raw: dict) -> FlowBundle:
    name = raw.get("flow", "identity")
    try:
        if name == "identity":
            return FlowBundle.identity(m)
        if name == "translation":
            return FlowBundle.translation(m, _vec(raw, "flow.u", np.eye(m.dim)[0]))
        if name == "rotation":
            plane = tuple(int(v) for v in _vec(raw, "flow.plane", np.array([0.0, 1.0])))
            return FlowBundle.rotation(m, _float(raw, "flow.angle", 0.5), plane)
    except ValueError as exc:
        raise ConfigError(f"flow {name!r}: {exc}") from None
    raise ConfigError(f"unknown flow {name!r}; expected one of {FLOWS}")


def build_form(m: ModelManifold, raw: dict, x, probe) -> OneFormBundle:
    name = raw.get("form", "exact")
    try:
        if name == "exact":
            fld, _, params = _field_spec(m, raw, "form.field", x)
            return OneFormBundle.exact(m, fld, params=params, probe=probe)
        if name == "constant":
            return OneFormBundle.constant(m, _vec(raw, "form.u", np.eye(m.dim)[0]))
        if name == "killing":
            return OneFormBundle.killing(build_flow(m, raw))
    except ValueError as exc:
        raise ConfigError(f"form {name!r}: {exc}") from None
    raise ConfigError(f"unknown form {name!r}; expected one of {FORMS}")


def _point(m, raw, key, default=None):
    v = _vec(raw, key, None)
    if v is None:
        return default
    if v.shape != (m.ambient_dim,):
        raise ConfigError(f"{key} needs {m.ambient_dim} ambient coordinates")
    if np.any(m.point_error(v) > 1e-8):
        raise ConfigError(f"{key} = {raw[key]} is not a point of {m}")
    return v


@dataclass
class Experiment:
    raw: dict
    m: ModelManifold
    V: PotentialBundle
    f: ScalarFieldBundle
    x: np.ndarray
    y: Optional[np.ndarray]  # (k, D): Harnack partners of x
    points: Optional[np.ndarray]
    t: float
    t_grid: Optional[np.ndarray]
    steps: int
    n_paths: int
    seed: int
    estimates: list
    checks: list
    ps: tuple = ()
    q: Optional[float] = None
    delta: Optional[float] = None
    antithetic: bool = False
    refine: bool = True
    independent_seeds: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def p(self) -> Optional[float]:
        return self.ps[0] if self.ps else None

    def with_value(self, axis: str, value):
        """A copy with one of steps / n_paths / t replaced (for sweeps)."""
        raw = dict(self.raw)
        raw[axis] = str(value)
        return build_experiment(raw, seed_override=self.seed)


def build_experiment(raw: dict, seed_override: Optional[int] = None) -> Experiment:
    for key in raw:
        if key not in KNOWN_KEYS and not key.startswith(KNOWN_PREFIXES):
            raise ConfigError(f"unknown config key {key!r}")
    m = build_manifold(raw)
    x = _point(m, raw, "x", m.base_point() if m.kind != "torus" else np.full(m.dim, 0.5 * m.scale))
    y = None
    if "y" in raw:
        y = np.array([_point(m, {"y": s}, "y") for s in raw["y"].split(";") if s.strip()])
    points = None
    if "points" in raw:
        pts = [_vector(s, "points") for s in raw["points"].split(";") if s.strip()]
        if any(p.shape != (m.ambient_dim,) for p in pts):
            raise ConfigError(f"points need {m.ambient_dim} ambient coordinates each")
        points = np.array(pts)
        if np.any(m.point_error(points) > 1e-8):
            raise ConfigError("points contain an entry that is not on the manifold")
    elif "points.random" in raw:
        k = _int(raw, "points.random")
        rng = np.random.default_rng(_int(raw, "points.seed", 0))
        points = m.random_point(rng, k, _float(raw, "points.spread", 1.0))

    t = _float(raw, "t", 1.0)
    if not t > 0:
        raise ConfigError("t must be positive")
    t_grid = _vec(raw, "t_grid", None)
    if t_grid is not None and np.any(t_grid <= 0):
        raise ConfigError("t_grid entries must be positive")
    steps = _int(raw, "steps", 100)
    n_paths = _int(raw, "n_paths", 10_000)
    seed = _int(raw, "seed", 0) if seed_override is None else int(seed_override)
    if steps < 1 or n_paths < 2 or seed < 0:
        raise ConfigError("steps and n_paths must be positive (n_paths >= 2) and seed non-negative")
    antithetic = _bool(raw, "antithetic", False)
    if antithetic and n_paths % 2:
        raise ConfigError("antithetic ensembles need an even n_paths")

    estimates = _names(raw, "estimates")
    for e in estimates:
        if e not in ESTIMATES:
            raise ConfigError(f"unknown estimate {e!r}; expected one of {ESTIMATES}")
    checks = _names(raw, "checks")
    for c in checks:
        head, _, tail = c.partition(":")
        ok = (
            (head == "gradient" and tail in GRADIENT_CHECKS)
            or (head == "harnack" and tail == "")
            or (head == "shift_harnack" and tail in ("quadratic", "log"))
            or (head == "oracle" and tail in ORACLES)
        )
        if not ok:
            raise ConfigError(f"unknown check {c!r}")

    V = build_potential(m, raw)
    f = build_field(m, raw, x)
    exp = Experiment(
        raw, m, V, f, x, y, points, t, t_grid, steps, n_paths, seed, estimates, checks,
        ps=tuple(_vec(raw, "p", np.array([])).tolist()), q=_float(raw, "q"), delta=_float(raw, "delta"),
        antithetic=antithetic, refine=_bool(raw, "refine", True),
        independent_seeds=_bool(raw, "independent_seeds", False),
    )
    # build the remaining bundles now so that bad names fail before any output
    if any(e.startswith("inside") for e in estimates) or any(c.startswith("shift_harnack") for c in checks):
        exp.extras["flow"] = build_flow(m, raw)
    if any(e.startswith("divergence") for e in estimates):
        from .bounds import probe_points

        exp.extras["form"] = build_form(m, raw, x, probe_points(m, None if m.is_compact else x, density=2000))
    if any(c.startswith("harnack") for c in checks) and y is None:
        raise ConfigError("harnack checks need y")
    if any(c in ("harnack", "shift_harnack:log") or c.endswith(("lp", "uniform_lp")) for c in checks) and exp.p is None:
        raise ConfigError("this check needs p")
    if "charac_limit" in estimates and (t_grid is None or exp.p is None):
        raise ConfigError("charac_limit needs t_grid and p")
    if "kappa_vq" in estimates and exp.q is None:
        raise ConfigError("kappa_vq needs q")
    if "linear_potential_value" in estimates or "oracle:linear_potential" in checks:
        if raw.get("potential") != "linear" or m.kind != "euclidean" or m.dim != 1:
            raise ConfigError("the linear-potential oracle needs potential = linear on 1-dimensional Euclidean space")
    if "mehler" in estimates or "oracle:mehler" in checks:
        if raw.get("potential") != "harmonic" or m.dim != 1:
            raise ConfigError("the Mehler oracle needs potential = harmonic on 1-dimensional Euclidean space")
    if "pde_reference" in estimates and (m.kind != "euclidean" or m.dim != 1):
        raise ConfigError("pde_reference is one-dimensional")
    return exp
