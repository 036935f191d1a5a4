"""A short tour of the library API (runs in well under a minute).

    python demos/tour.py
"""
import numpy as np

from fklab import bounds, estimators, fields, oracle, potential
from fklab.bundles import ScalarFieldBundle
from fklab.geometry import ModelManifold
from fklab.stochastics import SimConfig

# 1. The harmonic oscillator on the line: Monte Carlo, closed form, PDE.
R1 = ModelManifold("euclidean", 1)
V = potential.harmonic(R1)
mc = estimators.semigroup(R1, np.zeros(1), 1.0, V, 1.0, SimConfig(1.0, 200), n_paths=50_000, seed=1)
pde = oracle.pde_reference_1d(V, lambda p: np.ones(len(p)), 1.0, dx=1e-2, dt=1e-2)
print(f"P_1 1(0): Monte Carlo {mc.mean:.5f} +- {mc.stderr:.5f}, Mehler {oracle.mehler_value(0.0, 1.0):.5f}, PDE {pde(0.0):.5f}")

# 2. Three gradient estimators on the sphere with a trigonometric potential.
S2 = ModelManifold("sphere", 2)
x = S2.base_point()
Vs = potential.trig(S2)
f = ScalarFieldBundle.from_field(S2, fields.gaussian(np.array([0.6, 0.0, 0.8]), 0.8))
cfg = SimConfig(0.5, 50)
b = estimators.bismut_gradient(S2, x, 0.5, Vs, f, cfg, 20_000, seed=2, antithetic=True)
d = estimators.derivative_formula(S2, x, None, 0.5, Vs, f, cfg, 20_000, seed=3, antithetic=True)
fd = estimators.fd_gradient(S2, x, 0.5, Vs, f, cfg, 20_000, seed=4, antithetic=True)
for name, e in (("Bismut", b), ("derivative formula", d), ("finite differences", fd)):
    print(f"grad P_t f at the pole, {name:>18}: {np.round(e.mean, 4)} +- {np.round(e.stderr, 4)}")

# 3. A gradient bound and a Harnack inequality, checked with their margins.
scn = bounds.Scenario(S2, x, 0.5, Vs, f, steps=50, n_paths=4000, seed=5, antithetic=True)
rep = bounds.check_gradient_bound("linf", scn)
print(f"{rep.name}: |grad P_t f| = {rep.lhs.mean:.4f} <= {rep.rhs_value:.4f}  ({rep.verdict})")
g = ScalarFieldBundle.from_field(S2, fields.gaussian(np.array([0.6, 0.0, 0.8]), 0.8) + 0.2)
for r in bounds.check_harnack_family(S2, x, np.array([0.0, 0.6, -0.8]), [1.5, 2, 4], 0.5, Vs, g, cfg, 4000, seed=6):
    print(f"harnack p={r.inputs['p']}: {r.lhs.mean:.4f} <= {r.rhs_value:.4f}  ({r.verdict})")

# 4. Damped transport on the hyperbolic plane equals its closed form.
print(f"Q_1 on H^2: e^(1/2) = {oracle.q_closed_form(ModelManifold('hyperbolic', 2), 1.0):.5f}")
