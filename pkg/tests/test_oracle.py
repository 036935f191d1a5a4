import numpy as np
import pytest
from scipy.stats import norm

from fklab import oracle, potential
from fklab.geometry import ModelManifold

R1 = ModelManifold("euclidean", 1)


def _zero(p):
    return np.zeros(p.shape[0])


def _one(p):
    return np.ones(p.shape[0])


def _harmonic(p):
    return 0.5 * p[:, 0] ** 2


# ----------------------------------------------------------- closed forms
def test_mehler_examples():
    assert oracle.mehler_value(0.0, 1.0) == pytest.approx(np.cosh(1.0) ** -0.5, rel=1e-15)
    assert oracle.mehler_value(0.0, 1.0) == pytest.approx(0.805013, abs=1e-5)
    assert oracle.mehler_value(0.0, 1e-12) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        oracle.mehler_value(0.0, 0.0)


def test_linear_potential_examples():
    assert oracle.linear_potential_value(0.3, 2.0, 0.0) == (pytest.approx(1.0), pytest.approx(0.0))
    v, d = oracle.linear_potential_value(0.0, 1.0, 1.0)
    assert v == pytest.approx(np.exp(1 / 6)) and v == pytest.approx(1.18136, abs=1e-5)
    assert d == pytest.approx(-np.exp(1 / 6))
    for x in (-1.0, 0.0, 0.7):
        h = 1e-5
        fd = (oracle.linear_potential_value(x + h, 1.3, 0.8)[0] - oracle.linear_potential_value(x - h, 1.3, 0.8)[0]) / (2 * h)
        assert abs(fd - oracle.linear_potential_value(x, 1.3, 0.8)[1]) < 1e-8


def test_q_closed_form_examples():
    assert oracle.q_closed_form(ModelManifold("euclidean", 3), 2.0) == 1.0
    assert oracle.q_closed_form(ModelManifold("torus", 2), 2.0) == 1.0
    assert oracle.q_closed_form(ModelManifold("sphere", 2), 1.0) == pytest.approx(np.exp(-0.5))
    assert oracle.q_closed_form(ModelManifold("hyperbolic", 2), 1.0) == pytest.approx(np.exp(0.5))
    assert oracle.q_closed_form(ModelManifold("sphere", 3, 2.0), 1.0) == pytest.approx(np.exp(-0.25))
    with pytest.raises(TypeError):
        oracle.q_closed_form("sphere", 1.0)


# ---------------------------------------------------------- PDE reference
def test_pde_heat_flow_of_gaussian():
    sol = oracle.pde_reference_1d(_zero, lambda p: norm.pdf(p[:, 0]), 0.5, A=10.0, dx=1e-3, dt=1e-3)
    exact = norm.pdf(sol.x_grid, scale=np.sqrt(1.5))
    assert np.max(np.abs(sol.final - exact)) < 1e-6


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_pde_matches_mehler(t):
    sol = oracle.pde_reference_1d(_harmonic, _one, t, dx=1e-3, dt=1e-3)
    xs = np.array([0.0, 0.5, 1.0, 2.0])
    assert np.max(np.abs(sol(xs) - oracle.mehler_value(xs, t))) < 1e-4
    if t == 1.0:
        assert sol(0.0) == pytest.approx(0.805013, abs=1e-4)


def test_pde_accepts_potential_bundles():
    V = potential.harmonic(R1)
    a = oracle.pde_reference_1d(V, _one, 0.5, dx=1e-2, dt=1e-2)
    b = oracle.pde_reference_1d(_harmonic, _one, 0.5, dx=1e-2, dt=1e-2)
    assert np.array_equal(a.final, b.final)


def test_pde_grid_refinement_is_second_order():
    t = 0.5
    f = lambda p: norm.pdf(p[:, 0])
    xs = np.linspace(-3, 3, 13)
    exact = norm.pdf(xs, scale=np.sqrt(1 + t))
    errs = [np.max(np.abs(oracle.pde_reference_1d(_zero, f, t, A=10.0, dx=dx, dt=1e-3)(xs) - exact)) for dx in (0.1, 0.05, 0.025)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 3.5) & (ratios < 4.5)), ratios


def test_pde_constant_potential_commutes():
    f = lambda p: np.exp(-p[:, 0] ** 2) + 0.2 * np.cos(p[:, 0])
    lam = 0.7
    a = oracle.pde_reference_1d(lambda p: np.full(p.shape[0], lam), f, 1.0, A=8.0, dx=1e-2, dt=1e-2)
    b = oracle.pde_reference_1d(_zero, f, 1.0, A=8.0, dx=1e-2, dt=1e-2)
    assert np.max(np.abs(a.final - np.exp(-lam * 1.0) * b.final)) < 1e-10


def test_pde_positivity():
    f = lambda p: (np.abs(p[:, 0]) < 0.5).astype(float)  # rough nonnegative data
    sol = oracle.pde_reference_1d(lambda p: np.sin(3 * p[:, 0]), f, 1.0, A=6.0, dx=1e-2, dt=5e-2, save_every=1)
    assert np.min(sol.values) >= -1e-12
    assert len(sol.times) == 21 and sol.times[-1] == pytest.approx(1.0)


def test_pde_rejects_bad_grid():
    with pytest.raises(ValueError):
        oracle.pde_reference_1d(_zero, _one, 0.0)
    with pytest.raises(ValueError):
        oracle.pde_reference_1d(_zero, _one, 1.0, dt=0.5)
    with pytest.raises(ValueError):
        oracle.pde_reference_1d(_zero, _one, 1.0, dx=0.0)


def test_grid_solution_csv(tmp_path):
    sol = oracle.pde_reference_1d(_harmonic, _one, 0.2, A=2.0, dx=0.5, dt=0.1)
    path = tmp_path / "grid.csv"
    sol.to_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], sol.x_grid) and np.array_equal(data[:, 1], sol.final)
    assert path.read_text().splitlines()[0] == "x,u"
