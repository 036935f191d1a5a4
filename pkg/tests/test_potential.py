import numpy as np
import pytest

from fklab import fields, potential
from fklab.bundles import FlowBundle, OneFormBundle, ScalarFieldBundle
from fklab.estimators import charac_test_field
from fklab.geometry import ModelManifold
from fklab.registry import window_field
from fklab.stochastics import RngStream, SimConfig, run_ensemble, simulate_paths

R1 = ModelManifold("euclidean", 1)
R2 = ModelManifold("euclidean", 2)
S2 = ModelManifold("sphere", 2)
H2 = ModelManifold("hyperbolic", 2)
T2 = ModelManifold("torus", 2, 2 * np.pi)
ALL = [R1, R2, S2, H2, T2]


def _library(m):
    out = [potential.zero(m), potential.constant(m, -0.7), potential.trig(m, 0.8, -0.5, 0.2)]
    if m.kind == "euclidean":
        out += [potential.linear(m, np.linspace(0.5, 1.0, m.dim)), potential.harmonic(m)]
    return out


# ------------------------------------------------------------- fk weight
def test_fk_weight_constant_potentials():
    rec = simulate_paths(S2, S2.base_point(), SimConfig(1.5, 20), [RngStream(0, i) for i in range(3)])
    assert np.array_equal(potential.fk_weight(rec, potential.zero(S2)), np.ones(3))
    assert np.allclose(potential.fk_weight(rec, potential.constant(S2, 0.4)), np.exp(-0.6), rtol=1e-15)


@pytest.mark.parametrize("m", [R2, S2, T2], ids=str)
def test_fk_weight_range(m):
    V = potential.trig(m, 0.8, -0.5, 0.2)
    t = 1.2
    x = m.base_point() if m.kind != "torus" else np.ones(2)
    rec = simulate_paths(m, x, SimConfig(t, 30), [RngStream(1, i) for i in range(200)])
    w = potential.fk_weight(rec, V)
    assert np.all(w > 0)
    assert np.all(w <= np.exp(-t * V.inf_V) * (1 + 1e-12))


def test_fk_weight_mehler_mean():
    V = potential.harmonic(R1)

    def red(s):
        return s.weight[:, None]

    n, N = 100_000, 200
    coarse = run_ensemble(R1, np.zeros(1), SimConfig(1.0, N), n, 3, red, V, coarsen=2)[0, :, 0]
    fine = run_ensemble(R1, np.zeros(1), SimConfig(1.0, 2 * N), n, 3, red, V)[0, :, 0]
    band = 3 * coarse.std(ddof=1) / np.sqrt(n) + 2 * abs(coarse.mean() - fine.mean())
    assert abs(coarse.mean() - np.cosh(1.0) ** -0.5) <= band


# ----------------------------------------------------------------- kappas
def test_kappa_constant_and_analytic():
    V0 = potential.constant(S2, 2.0)
    assert potential.kappa_v(S2, S2.base_point(), 1.0, V0).mean == 0.0
    assert potential.kappa_vq(S2, S2.base_point(), 1.0, 2.0, V0, n_paths=100).mean == 0.0
    V = potential.trig(R2, 1.0, 1.0)
    est = potential.kappa_v(R2, np.zeros(2), 0.5, V)
    assert est.mean == pytest.approx(0.5 * np.sqrt(2.0))
    assert est.extra["analytic_bound"] == pytest.approx(0.5 * np.sqrt(2.0))


def test_kappa_unavailable_without_ensemble():
    with pytest.raises(ValueError, match="kappa unavailable"):
        potential.kappa_v(R1, np.zeros(1), 1.0, potential.harmonic(R1))
    with pytest.raises(ValueError, match="q must exceed 1"):
        potential.kappa_vq(R1, np.zeros(1), 1.0, 1.0, potential.trig(R1))


def test_kappa_v_against_gaussian_quadrature():
    # E int_0^1 |cos B_s| ds, inner expectation by Gauss-Hermite, outer by Gauss-Legendre
    V = potential.trig(R1, 1.0, 0.0)
    z, wz = np.polynomial.hermite_e.hermegauss(150)
    s, ws = np.polynomial.legendre.leggauss(60)
    s = 0.5 * (s + 1.0)
    inner = np.array([np.sum(wz * np.abs(np.cos(np.sqrt(si) * z))) / np.sqrt(2 * np.pi) for si in s])
    exact = 0.5 * np.sum(ws * inner)
    est = potential.kappa_v(R1, np.zeros(1), 1.0, V, SimConfig(1.0, 200), n_paths=40_000, seed=5)
    band = 3 * est.stderr + 2e-4  # trapezoid error at h = 0.005 on a Lipschitz integrand
    assert abs(est.mean - exact) <= band
    assert est.mean <= est.extra["analytic_bound"]


def test_kappa_vq_constant_gradient_and_monotonicity():
    V = potential.linear(R1, [2.0])
    est = potential.kappa_vq(R1, np.zeros(1), 0.7, 3.0, V, SimConfig(0.7, 20), n_paths=50)
    assert est.mean == pytest.approx(1.4, rel=1e-12)
    Vs = potential.trig(R1, 1.0, 0.0)
    k1 = potential.kappa_v(R1, np.zeros(1), 1.0, Vs, SimConfig(1.0, 50), n_paths=20_000, seed=2)
    k2 = potential.kappa_vq(R1, np.zeros(1), 1.0, 2.0, Vs, SimConfig(1.0, 50), n_paths=20_000, seed=2)
    assert k1.mean <= k2.mean + 3 * np.hypot(k1.stderr, k2.stderr)


def test_kappa_nondecreasing_in_t():
    V = potential.trig(S2, 1.0, 0.5)
    means = []
    for t in (0.25, 0.5, 1.0):
        e = potential.kappa_v(S2, S2.base_point(), t, V, SimConfig(t, 40), n_paths=4000, seed=1)
        means.append((e.mean, e.stderr))
    for (a, sa), (b, sb) in zip(means, means[1:]):
        assert a <= b + 3 * np.hypot(sa, sb)


def test_kappa_bound_sources():
    V = potential.trig(R2)
    assert potential.kappa_bound(R2, 0.5, V) == (pytest.approx(0.5 * np.sqrt(2)), "analytic")
    VH = potential.trig(H2)
    val, src = potential.kappa_bound(H2, 0.5, VH, probe=H2.base_point()[None, :], cfg=SimConfig(0.5, 20), n_paths=500)
    assert src.startswith("probe-set") and 0 < val < np.inf
    with pytest.raises(ValueError):
        potential.kappa_bound(H2, 0.5, VH)


# -------------------------------------------------------- bundle invariants
@pytest.mark.parametrize("m", ALL, ids=str)
def test_potential_bounds_hold_on_random_points(m):
    rng = np.random.default_rng(0)
    p = m.random_point(rng, 1000, spread=2.0)
    for V in _library(m):
        assert np.all(V.V(p) >= V.inf_V - 1e-12), V.name
        assert np.all(V.grad_norm(p) <= V.grad_sup * (1 + 1e-12) + 1e-12), V.name
        assert np.all(np.abs(V.V(p)) <= V.sup_abs + 1e-12), V.name


def test_library_rejects_non_flat_linear_and_harmonic():
    with pytest.raises(ValueError):
        potential.linear(S2, [1.0, 0.0])
    with pytest.raises(ValueError):
        potential.harmonic(H2)
    with pytest.raises(ValueError):
        potential.linear(R2, [1.0])


def _fd_differential(fld, p, h=1e-5):
    D = p.shape[-1]
    out = np.empty_like(p)
    for i in range(D):
        e = np.zeros(D)
        e[i] = h
        out[..., i] = (fld.value(p + e) - fld.value(p - e)) / (2 * h)
    return out


@pytest.mark.parametrize("m", ALL, ids=str)
def test_analytic_differentials_match_finite_differences(m):
    rng = np.random.default_rng(1)
    p = m.random_point(rng, 1000)
    c = m.random_point(rng)
    flds = [V.field for V in _library(m)]
    flds += [fields.gaussian(c, 0.8), fields.gaussian(c, 0.8) * fields.compose("cos", fields.coordinate(0, m.ambient_dim))]
    if m.kind == "torus":
        flds.append(fields.periodic_bump(c, 0.7, m.scale))
    for fld in flds:
        scale = max(1.0, float(np.max(np.abs(fld.grad(p)))))
        assert np.max(np.abs(fld.grad(p) - _fd_differential(fld, p))) < 1e-6 * scale, fld.label
        # Hessian against differences of the analytic gradient
        g = fld.grad
        H = fld.hess(p)
        for i in range(m.ambient_dim):
            e = np.zeros(m.ambient_dim)
            e[i] = 1e-5
            col = (g(p + e) - g(p - e)) / 2e-5
            assert np.max(np.abs(H[..., :, i] - col)) < 1e-5 * max(1.0, float(np.max(np.abs(H))))


def test_window_field_is_flat_near_center():
    w = window_field(np.zeros(1), 10.0)
    x = np.linspace(-5, 5, 101)[:, None]
    assert np.max(np.abs(w.value(x) - 1.0)) < 2e-5
    assert w.value(np.array([[20.0]]))[0] < 1e-100
    assert np.max(np.abs(w.grad(x[:, :]) - _fd_differential(w, x))) < 1e-8


def test_charac_field_properties():
    x = np.array([0.3, -0.1])
    X = np.array([0.6, 0.8])
    f = charac_test_field(R2, x, X, alpha=1.5)
    assert f.f(x) == pytest.approx(1.5)
    assert np.allclose(f.df(x), X)
    assert np.allclose(f.field.hess(x), 0.0, atol=1e-12)
    fs = charac_test_field(S2, S2.base_point(), np.array([1.0, 0, 0]))
    p = S2.base_point()
    # Riemannian Hessian of a linear ambient function vanishes at x along X: second derivative along the geodesic
    h = 1e-4
    g = lambda s: fs.f(S2.exp_map(p, s * np.array([1.0, 0, 0])))
    assert abs((g(h) + g(-h) - 2 * g(0)) / h**2) < 1e-6
    with pytest.raises(ValueError):
        charac_test_field(R2, x, 2 * X)


def test_scalar_field_bundle_without_derivatives():
    f = ScalarFieldBundle.from_callable(S2, lambda p: p[..., 0])
    assert not f.has_df
    with pytest.raises(ValueError):
        f.df(S2.base_point())
    with pytest.raises(ValueError):
        f.laplacian_f(S2.base_point())


def test_schroedinger_operator_on_sphere_eigenfunction():
    # z is an eigenfunction of the Laplacian on the unit 2-sphere with eigenvalue -2
    f = ScalarFieldBundle.from_field(S2, fields.coordinate(2, 3))
    V = potential.constant(S2, 0.5)
    p = S2.random_point(np.random.default_rng(2), 20)
    assert np.allclose(f.H(V, p), (1.0 + 0.5) * p[:, 2])


# ------------------------------------------------------------ forms, flows
def test_one_form_constructors():
    with pytest.raises(ValueError):
        OneFormBundle.constant(S2, [1.0, 0.0, 0.0])
    rot = FlowBundle.rotation(S2, 0.5)
    form = OneFormBundle.killing(rot)
    p = S2.random_point(np.random.default_rng(3), 10)
    assert np.array_equal(form.costar_alpha(p), np.zeros(10))
    fld = fields.gaussian(np.array([0.0, 0.6, 0.8]), 0.7)
    ex = OneFormBundle.exact(S2, fld, probe=p)
    assert np.allclose(ex.costar_alpha(p), -S2.laplacian(p, fld.grad(p), fld.hess(p)))
    assert ex.sup_costar == pytest.approx(np.max(np.abs(ex.costar_alpha(p))))


@pytest.mark.parametrize(
    "flow",
    [FlowBundle.identity(R2), FlowBundle.translation(R2, [0.3, -0.2]), FlowBundle.translation(T2, [1.0, 2.0]), FlowBundle.rotation(S2, 0.7, (0, 2))],
    ids=lambda f: f"{f.m.kind}-{f.name}",
)
def test_flow_consistency(flow):
    m = flow.m
    rng = np.random.default_rng(4)
    p = m.random_point(rng, 50)
    assert np.allclose(flow.F(0.0, p), p)
    for s in (0.0, 0.4, 0.9):
        d = 1e-5
        dF = (flow.F(s + d, p) - flow.F(s - d, p)) / (2 * d)
        if m.kind == "torus":
            dF = ((flow.F(s + d, p) - flow.F(s - d, p) + m.scale / 2) % m.scale - m.scale / 2) / (2 * d)
        Y = flow.Y(s, p)
        # DF_s Y_s by a directional difference of the ambient extension of F_s
        e = 1e-5
        push = (flow.F(s, p + e * Y) - flow.F(s, p - e * Y)) / (2 * e)
        if m.kind == "torus":
            push = ((flow.F(s, p + e * Y) - flow.F(s, p - e * Y) + m.scale / 2) % m.scale - m.scale / 2) / (2 * e)
        assert np.max(np.abs(dF - push)) < 1e-6
        assert np.all(m.norm(Y) <= flow.sup_Y + 1e-12)
        assert np.all(np.abs(flow.divY(s, p)) <= flow.sup_divY + 1e-12)
    with pytest.raises(ValueError):
        FlowBundle.translation(S2, [1.0, 0.0, 0.0])
