"""Monte Carlo estimation of Feynman-Kac semigroups, their gradients and the
gradient / Harnack inequalities they satisfy, on model manifolds."""
from .geometry import ModelManifold
from .stochastics import SimConfig, run_ensemble, set_threads
from .results import Estimate
from .bundles import FlowBundle, OneFormBundle, PotentialBundle, ScalarFieldBundle
from .estimators import (
    bismut_gradient,
    charac_limit,
    derivative_formula,
    divergence_formula,
    fd_gradient,
    inside_derivative,
    semigroup,
)
from .bounds import (
    BoundReport,
    Scenario,
    check_gradient_bound,
    check_gradient_bounds,
    check_harnack,
    check_shift_harnack,
)
from .oracle import linear_potential_value, mehler_value, pde_reference_1d, q_closed_form

__version__ = "0.1.0"
