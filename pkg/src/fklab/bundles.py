"""Analytic test-case carriers: potentials, scalar fields, 1-forms and flows.

Every bundle is bound to a :class:`~fklab.geometry.ModelManifold` and exposes
its derivatives in closed form.  Covectors (dV, df, alpha) are returned as
ambient Euclidean differentials; applied to a tangent vector w they act by
the plain dot product ``np.sum(d * w, -1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .fields import AmbientField
from .geometry import ModelManifold


@dataclass(frozen=True)
class PotentialBundle:
    """A C^1 potential V with its differential and the norms the bounds need."""

    m: ModelManifold
    field: AmbientField
    inf_V: float
    grad_sup: float
    sup_abs: float = np.inf
    name: str = "potential"
    params: dict = dc_field(default_factory=dict)

    def V(self, p):
        return self.field.value(p)

    def dV(self, p):
        return self.field.grad(p)

    def grad_norm(self, p):
        return self.m.covector_norm(p, self.dV(p))

    @property
    def is_constant(self) -> bool:
        return self.grad_sup == 0.0

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


@dataclass(frozen=True)
class ScalarFieldBundle:
    """A test function f; ``field`` is None when only values are available."""

    m: ModelManifold
    f_fn: Callable
    field: Optional[AmbientField] = None
    sup_f: Optional[float] = None
    sup_df: Optional[float] = None
    sup_laplacian: Optional[float] = None
    name: str = "field"
    params: dict = dc_field(default_factory=dict)

    @classmethod
    def from_field(cls, m, fld: AmbientField, name="field", params=None, **norms):
        return cls(m, fld.value, fld, name=name, params=params or {}, **norms)

    @classmethod
    def from_callable(cls, m, fn, name="callable", params=None, **norms):
        return cls(m, fn, None, name=name, params=params or {}, **norms)

    @property
    def has_df(self) -> bool:
        return self.field is not None

    def f(self, p):
        return self.f_fn(p)

    def df(self, p):
        if self.field is None:
            raise ValueError(f"scalar field {self.name!r} carries no analytic differential")
        return self.field.grad(p)

    def grad_norm(self, p):
        return self.m.covector_norm(p, self.df(p))

    def laplacian_f(self, p):
        if self.field is None:
            raise ValueError(f"scalar field {self.name!r} carries no analytic Laplacian")
        return self.m.laplacian(p, self.field.grad(p), self.field.hess(p))

    def H(self, V: PotentialBundle, p):
        """Schroedinger operator (-1/2 Laplacian + V) f."""
        return -0.5 * self.laplacian_f(p) + V.V(p) * self.f(p)

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


@dataclass(frozen=True)
class OneFormBundle:
    m: ModelManifold
    alpha: Callable
    costar_alpha: Callable
    sup_alpha: float
    sup_costar: float
    name: str = "form"
    params: dict = dc_field(default_factory=dict)

    @classmethod
    def exact(cls, m, fld: AmbientField, name="exact", params=None, probe=None):
        """alpha = dF, whose codifferential is -Laplacian(F)."""
        form = cls(
            m,
            fld.grad,
            lambda p: -m.laplacian(p, fld.grad(p), fld.hess(p)),
            np.inf,
            np.inf,
            name=name,
            params=params or {},
        )
        if probe is not None:
            form = form.with_norms(probe)
        return form

    @classmethod
    def constant(cls, m, u, name="constant", params=None):
        if not m.is_flat:
            raise ValueError("constant 1-forms are only parallel on flat manifolds")
        u = np.asarray(u, dtype=float)
        return cls(
            m,
            lambda p: np.broadcast_to(u, np.shape(p)).copy(),
            lambda p: np.zeros(np.shape(p)[:-1]),
            float(np.linalg.norm(u)),
            0.0,
            name=name,
            params=params or {"u": u.tolist()},
        )

    @classmethod
    def killing(cls, flow: "FlowBundle", name="killing"):
        """The metric dual of a divergence-free field; co-closed."""
        if flow.sup_divY != 0.0:
            raise ValueError("killing 1-form needs a divergence-free field")
        m = flow.m
        if m.kind == "hyperbolic":
            raise ValueError("metric dual on the hyperboloid is not implemented")
        return cls(
            m,
            lambda p: flow.Y(0.0, p),
            lambda p: np.zeros(np.shape(p)[:-1]),
            flow.sup_Y,
            0.0,
            name=name,
            params=dict(flow.params),
        )

    def with_norms(self, probe):
        a = np.max(self.m.covector_norm(probe, self.alpha(probe)))
        c = np.max(np.abs(self.costar_alpha(probe)))
        return OneFormBundle(
            self.m, self.alpha, self.costar_alpha, float(a), float(c), self.name, self.params
        )

    def costar_field(self) -> ScalarFieldBundle:
        return ScalarFieldBundle.from_callable(
            self.m, self.costar_alpha, name=f"costar({self.name})", sup_f=self.sup_costar
        )

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


@dataclass(frozen=True)
class FlowBundle:
    """A C^1 family of diffeomorphisms F_s with Y_s = (DF_s)^{-1} dF_s/ds."""

    m: ModelManifold
    F: Callable
    Y: Callable
    divY: Callable
    sup_Y: float
    sup_divY: float
    name: str = "flow"
    params: dict = dc_field(default_factory=dict)

    @classmethod
    def identity(cls, m):
        def zero(s, p):
            return np.zeros(np.shape(p))

        return cls(
            m,
            lambda s, p: np.array(p, dtype=float),
            zero,
            lambda s, p: np.zeros(np.shape(p)[:-1]),
            0.0,
            0.0,
            name="identity",
        )

    @classmethod
    def translation(cls, m, u):
        if not m.is_flat:
            raise ValueError("translation flows need a flat manifold")
        u = np.asarray(u, dtype=float)
        return cls(
            m,
            lambda s, p: m.project_point(np.asarray(p, dtype=float) + s * u),
            lambda s, p: np.broadcast_to(u, np.shape(p)).copy(),
            lambda s, p: np.zeros(np.shape(p)[:-1]),
            float(np.linalg.norm(u)),
            0.0,
            name="translation",
            params={"u": u.tolist()},
        )

    @classmethod
    def rotation(cls, m, angle, plane=(0, 1)):
        """Rotate the sphere by s*angle in the (i, j) coordinate plane."""
        if m.kind != "sphere":
            raise ValueError("rotation flows are defined on the sphere")
        i, j = plane
        D = m.ambient_dim
        gen = np.zeros((D, D))
        gen[i, j], gen[j, i] = -1.0, 1.0

        def rot(theta):
            c, s_ = np.cos(theta), np.sin(theta)
            R = np.eye(D)
            R[i, i], R[j, j], R[i, j], R[j, i] = c, c, -s_, s_
            return R

        return cls(
            m,
            lambda s, p: m.project_point(np.asarray(p, dtype=float) @ rot(s * angle).T),
            lambda s, p: angle * (np.asarray(p, dtype=float) @ gen.T),
            lambda s, p: np.zeros(np.shape(p)[:-1]),
            float(abs(angle) * m.scale),
            0.0,
            name="rotation",
            params={"angle": float(angle), "plane": list(plane)},
        )

    def describe(self) -> dict:
        return {"name": self.name, **self.params}
