"""Independent ground truth for the Monte Carlo estimators.

* :func:`mehler_value` -- P_t^V 1 for V(x) = x^2/2 on R.
* :func:`linear_potential_value` -- P_t^V 1 and its derivative for V(x) = a x on R.
* :func:`q_closed_form` -- the damped transport on a constant-curvature space.
* :func:`pde_reference_1d` -- finite differences for u_t = u''/2 - V u on [-A, A].
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .geometry import ModelManifold

MAX_DT = 0.1
RANNACHER_STEPS = 4


def mehler_value(x, t):
    """(cosh t)^{-1/2} exp(-x^2 tanh(t) / 2)."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    return np.cosh(t) ** -0.5 * np.exp(-0.5 * x**2 * np.tanh(t))


def linear_potential_value(x, t, a):
    """(value, d/dx value) of E exp(-int_0^t a (x + B_s) ds) = exp(-a x t + a^2 t^3 / 6)."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    value = np.exp(-a * x * t + a**2 * t**3 / 6.0)
    return value, -a * t * value


def q_closed_form(m: ModelManifold, t):
    """Scalar c with Q_t = c I: exp(-(n - 1) kappa t / 2)."""
    if not isinstance(m, ModelManifold):
        raise TypeError("q_closed_form needs a constant-curvature ModelManifold")
    return np.exp(-0.5 * m.ricci_factor * np.asarray(t, dtype=float))


@dataclass
class GridSolution1D:
    x_grid: np.ndarray
    values: np.ndarray  # (n_saved, len(x_grid))
    times: np.ndarray
    t: float
    scheme: str = "crank-nicolson"
    boundary: str = "absorbing"

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def __call__(self, x):
        """Linear interpolation of the solution at the final time."""
        return np.interp(x, self.x_grid, self.final)

    def to_csv(self, path):
        rows = np.column_stack([self.x_grid, self.final])
        np.savetxt(path, rows, delimiter=",", header="x,u", comments="", fmt="%.17g")


def default_half_width(t):
    return 10.0 + 5.0 * np.sqrt(t)


def pde_reference_1d(V, f, t, A=None, dx=1e-3, dt=1e-3, save_every=None) -> GridSolution1D:
    """Solve u_t = u''/2 - V u, u(0) = f on [-A, A] with u(+-A) = 0.

    Diffusion is stepped by Crank-Nicolson (with a few backward-Euler steps
    first to damp the non-smooth start), the potential by exact
    exp(-V dt/2) half-steps on either side (Strang splitting), so a constant
    potential contributes exactly e^{-lambda t}.  ``V`` and ``f`` are callables
    on arrays of shape (k, 1) or bundles with ``V`` / ``f`` methods.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not 0 < dt <= MAX_DT:
        raise ValueError(f"time step must lie in (0, {MAX_DT}]")
    if not dx > 0:
        raise ValueError("dx must be positive")
    A = default_half_width(t) if A is None else float(A)
    n_cells = int(round(2 * A / dx))
    x = np.linspace(-A, A, n_cells + 1)
    h = x[1] - x[0]
    pts = x[:, None]
    vfun = V.V if hasattr(V, "V") else V
    ffun = f.f if hasattr(f, "f") else f
    v = np.broadcast_to(np.asarray(vfun(pts), dtype=float), x.shape)
    u = np.array(np.broadcast_to(np.asarray(ffun(pts), dtype=float), x.shape))
    u[0] = u[-1] = 0.0

    n_steps = max(1, int(np.ceil(t / dt - 1e-12)))
    k = t / n_steps
    inner = n_cells - 1
    r = 0.5 / h**2  # generator coefficient of the second difference

    def banded(theta):
        ab = np.zeros((3, inner))
        ab[0, 1:] = -theta * k * r
        ab[1, :] = 1.0 + 2.0 * theta * k * r
        ab[2, :-1] = -theta * k * r
        return ab

    implicit, cn = banded(1.0), banded(0.5)
    half = np.exp(-0.5 * k * v[1:-1])
    save_every = save_every or n_steps
    saved, times = [u.copy()], [0.0]
    for step in range(n_steps):
        w = u[1:-1] * half
        if step < RANNACHER_STEPS:
            w = solve_banded((1, 1), implicit, w)
        else:
            lap = np.empty_like(w)
            lap[1:-1] = w[2:] - 2 * w[1:-1] + w[:-2]
            lap[0] = w[1] - 2 * w[0]
            lap[-1] = w[-2] - 2 * w[-1]
            w = solve_banded((1, 1), cn, w + 0.5 * k * r * lap)
        u[1:-1] = w * half
        if (step + 1) % save_every == 0 or step == n_steps - 1:
            saved.append(u.copy())
            times.append((step + 1) * k)
    return GridSolution1D(x, np.array(saved), np.array(times), float(t))
