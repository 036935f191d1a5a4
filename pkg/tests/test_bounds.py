import math

import numpy as np
import pytest
from scipy.integrate import quad

from fklab import bounds, fields, potential
from fklab.bounds import ConstantsConfig, Scenario
from fklab.bundles import FlowBundle, ScalarFieldBundle
from fklab.geometry import ModelManifold
from fklab.stochastics import SimConfig

R2 = ModelManifold("euclidean", 2)
S2 = ModelManifold("sphere", 2)
T2 = ModelManifold("torus", 2, 2 * np.pi)


def bump_plus(m, c, lift=0.1):
    return ScalarFieldBundle.from_field(m, fields.gaussian(np.asarray(c, dtype=float), 0.8) + lift)


# -------------------------------------------------------------- constants
def test_harnack_constant_examples():
    C1, C2 = bounds.harnack_constants(1.0, 1.0)
    assert C1 == pytest.approx((math.e**2 - 1) / 2, rel=1e-14)
    assert C2 == pytest.approx(0.5 / math.tanh(0.5), rel=1e-14)
    assert C1 == pytest.approx(3.19453, abs=1e-5) and C2 == pytest.approx(1.08198, abs=1e-5)
    for K in (1e-7, -1e-7, 0.0):
        a, b = bounds.harnack_constants(2.0, K)
        assert a == pytest.approx(1.0, abs=1e-6) and b == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        bounds.harnack_constants(0.0, 1.0)


def test_constant_identities_on_random_draws():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        t = rng.uniform(0.01, 3.0)
        K = rng.choice([-1, 1]) * 10 ** rng.uniform(-3, 0.5)
        L = rng.choice([-1, 1]) * 10 ** rng.uniform(-3, 0.5)
        rho, g, p = rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(1.05, 5)
        C1, C2 = bounds.harnack_constants(t, K)
        lhs = t * rho * g / (2 * C2)
        assert abs(lhs - rho * g / K * math.tanh(K * t / 2)) <= 1e-12 * max(1.0, abs(lhs))
        a = p * rho**2 * K / ((p - 1) * math.expm1(2 * K * t))
        b = p * rho**2 / ((p - 1) * 2 * t * C1)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))
    for _ in range(200):
        t, L = rng.uniform(0.05, 3.0), rng.uniform(-2.0, 2.0)
        ref = quad(lambda s: math.exp(L * s) * (t - s), 0.0, t, epsabs=0.0, epsrel=1e-13)[0] / t
        assert abs(bounds.alpha_bracket(t, L) - ref) <= 1e-12 * max(1.0, ref)


@pytest.mark.parametrize("fn", [bounds.c1, bounds.c2, bounds.decay_factor, bounds.alpha_bracket], ids=lambda f: f.__name__)
def test_series_branch_is_continuous(fn, monkeypatch):
    # both branches evaluated at |Kt| = 1e-4 +- 1e-9 agree; c1 switches on 2Kt
    for kt in (1e-4 - 1e-9, 1e-4 + 1e-9, -1e-4 - 1e-9, -1e-4 + 1e-9, 0.5e-4 - 1e-9, 0.5e-4 + 1e-9):
        for t in (0.5, 2.0):
            K = kt / t
            monkeypatch.setattr(bounds, "SERIES_CUTOFF", 1.0)
            series = fn(t, K)
            monkeypatch.setattr(bounds, "SERIES_CUTOFF", 0.0)
            closed = fn(t, K)
            assert abs(series - closed) < 1e-10 * max(1.0, abs(closed))


def test_c1_is_monotone_in_K():
    Ks = np.linspace(-3, 3, 601)
    v = np.array([bounds.c1(0.7, K) for K in Ks])
    assert np.all(np.diff(v) > 0)


def test_alpha_and_beta_examples():
    assert bounds.alpha_bracket(2.0, 0.0) == 1.0
    assert bounds.alpha_bracket(2.0, 1e-9) == pytest.approx(1.0)
    assert bounds.alpha_const(1.0, 0.3, 0.5, 0.0, 0.7, 2.0) == 0.7
    assert bounds.alpha_const(1.0, 0.3, 0.5, 0.0, 0.7, np.inf) == 0.7
    assert bounds.beta_const(0.5, 1.0, 0.3, 0.5, 0.0, 0.7, 2.0) == 0.7
    assert bounds.beta_const(1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0) == pytest.approx(0.5)
    limit = 0.2 + 1.0 * 0.4 * math.exp(-0.1) * bounds.alpha_bracket(1.0, 0.3)
    assert bounds.beta_const(1e12, 1.0, 0.1, 0.3, 1.0, 0.2, 0.4) == pytest.approx(limit, rel=1e-10)
    with pytest.raises(ValueError):
        bounds.beta_const(0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0)


def test_constants_config_validation():
    assert ConstantsConfig.for_manifold(ModelManifold("hyperbolic", 2)).K_minus == 0.5  # 2K <= Ric = -1
    assert ConstantsConfig.for_manifold(S2).K_minus == 0.0
    assert bounds.default_bdg_root(2.0) >= math.sqrt(2.0)
    with pytest.raises(ValueError):
        ConstantsConfig(1.0, 0.5)
    with pytest.raises(ValueError):
        ConstantsConfig(0.0, 0.0, bdg_root=lambda q: 1.0)


# --------------------------------------------------------- trivial checks
def test_gradient_checks_trivial_case():
    # antithetic pairs cancel the mean-zero Bismut weight exactly when Q is deterministic
    scn = Scenario(S2, S2.base_point(), 0.5, None, 2.0, steps=10, n_paths=200, p=2.0, antithetic=True)
    for r in bounds.check_gradient_bounds(bounds.GRADIENT_KINDS, scn):
        assert abs(r.lhs.mean) < 1e-12, r.name
        assert r.passed, r.name
        assert r.slack == pytest.approx(r.rhs_value, abs=1e-12), r.name


def test_lp_kinds_need_compact_manifold():
    scn = Scenario(R2, np.zeros(2), 0.5, None, bump_plus(R2, np.zeros(2)), steps=10, n_paths=100, p=2.0)
    with pytest.raises(ValueError):
        bounds.check_gradient_bound("lp", scn)
    with pytest.raises(ValueError):
        bounds.check_gradient_bound("nonsense", scn)


def test_harnack_trivial_case():
    r = bounds.check_harnack(S2, S2.base_point(), S2.base_point(), 2.0, 0.5, None, 3.0, SimConfig(0.5, 10), 200)
    assert r.passed
    assert r.slack == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        bounds.check_harnack(S2, S2.base_point(), S2.base_point(), 1.0, 0.5, None, 3.0)


def test_shift_harnack_identity_flow():
    f = bump_plus(R2, np.zeros(2))
    x = np.array([0.3, 0.0])
    r = bounds.check_shift_harnack("quadratic", R2, x, FlowBundle.identity(R2), None, 0.5, None, f, SimConfig(0.5, 20), 2000)
    assert r.passed
    assert r.inputs["alpha_sq_integral"] == 0.0
    assert r.slack == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        bounds.check_shift_harnack("log", R2, x, FlowBundle.identity(R2), 1.0, 0.5, None, f)
    with pytest.raises(ValueError):
        bounds.check_shift_harnack("cubic", R2, x, FlowBundle.identity(R2), 2.0, 0.5, None, f)


def test_report_verdict_follows_margin():
    from fklab.results import Estimate

    r = bounds.BoundReport("x", Estimate(1.0, 0.1, 10), 0.8, -0.2, 0.3)
    assert r.passed
    r = bounds.BoundReport("x", Estimate(1.0, 0.1, 10), 0.8, -0.2, 0.1)
    assert not r.passed
    r = bounds.BoundReport("x", Estimate(np.nan, 0.1, 10), 0.8, np.nan, 0.1)
    assert not r.passed
    d = r.to_dict()
    assert d["verdict"] == "fail" and set(d) >= {"lhs", "rhs", "slack", "margin", "inputs"}


# --------------------------------------------------- theorem-backed checks
def test_linf_on_sphere_at_sampled_points():
    V = potential.trig(S2, 1.0, 0.0)
    pts = S2.random_point(np.random.default_rng(1), 20)
    scn = Scenario(S2, pts, 0.5, V, bump_plus(S2, S2.base_point(), 0.0), steps=20, n_paths=2000, seed=1, antithetic=True)
    r = bounds.check_gradient_bound("linf", scn)
    assert r.passed and r.slack > 0


@pytest.mark.parametrize("t", [0.25, 1.0])
def test_gradestbas_on_plane(t):
    V = potential.trig(R2, 1.0, 1.0)
    pts = np.random.default_rng(2).uniform(-1, 1, size=(20, 2))
    scn = Scenario(R2, pts, t, V, bump_plus(R2, np.zeros(2), 0.0), steps=20, n_paths=2000, seed=2, antithetic=True)
    assert bounds.check_gradient_bound("gradestbas", scn).passed


def test_harnack_on_plane_and_sphere():
    V = potential.trig(R2, 1.0, 1.0)
    reps = bounds.check_harnack_family(R2, np.zeros(2), np.array([1.0, 0.0]), [1.5, 2.0, 4.0], 0.5, V, bump_plus(R2, np.zeros(2)), SimConfig(0.5, 20), 4000, 3)
    assert all(r.passed for r in reps)
    r = bounds.check_harnack(S2, S2.base_point(), S2.base_point(), 2.0, 0.5, potential.constant(S2, 0.5), bump_plus(S2, S2.base_point()), SimConfig(0.5, 20), 4000, 4)
    assert r.passed


@pytest.mark.parametrize("form", ["quadratic", "log"])
def test_shift_harnack_translation_and_rotation(form):
    V = potential.trig(R2, 1.0, 1.0)
    r = bounds.check_shift_harnack(form, R2, np.zeros(2), FlowBundle.translation(R2, [1.0, 0.0]), 2.0, 0.5, V, bump_plus(R2, np.zeros(2)), SimConfig(0.5, 20), 4000, 5)
    assert r.passed
    rot = FlowBundle.rotation(S2, 0.3, (0, 1))
    x = S2.project_point(np.array([1.0, 0.0, 0.3]))
    r = bounds.check_shift_harnack(form, S2, x, rot, 2.0, 0.5, potential.trig(S2), bump_plus(S2, x), SimConfig(0.5, 20), 4000, 6)
    assert r.passed


def test_oracle_check_reports_error_and_margin():
    from fklab.results import Estimate

    def fake(steps, coarsen):
        return Estimate(1.0 + 1.0 / steps, 0.01, 100)

    r = bounds.check_against_oracle("demo", fake, 0.9, 10)
    assert r.lhs.mean == pytest.approx(0.2)
    assert r.margin == pytest.approx(0.03 + 2 * 0.05)
    assert not r.passed
    assert bounds.check_against_oracle("demo", fake, 1.0, 10).passed
