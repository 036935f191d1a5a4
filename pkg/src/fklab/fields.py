"""Smooth functions of the ambient coordinates with analytic derivatives.

An :class:`AmbientField` evaluates a function F of the ambient coordinates
together with its Euclidean gradient and Hessian.  Restricted to a model
manifold these give the differential, the Riemannian gradient and the
Laplace-Beltrami operator without any numerical differentiation.

Fields compose with ``+``, ``-``, ``*`` and scalar arithmetic, and with
:func:`compose` for an outer scalar function (exp, sqrt, ...).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class AmbientField:
    value: Callable
    grad: Callable
    hess: Callable
    label: str = "field"

    def __call__(self, p):
        return self.value(p)

    def __add__(self, other):
        other = as_field(other)
        return AmbientField(
            lambda p: self.value(p) + other.value(p),
            lambda p: self.grad(p) + other.grad(p),
            lambda p: self.hess(p) + other.hess(p),
            f"({self.label} + {other.label})",
        )

    __radd__ = __add__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-as_field(other))

    def __rsub__(self, other):
        return as_field(other) - self

    def __mul__(self, other):
        if np.isscalar(other):
            c = float(other)
            return AmbientField(
                lambda p: c * self.value(p),
                lambda p: c * self.grad(p),
                lambda p: c * self.hess(p),
                f"{c:g}*{self.label}",
            )
        other = as_field(other)

        def grad(p):
            return self.grad(p) * other.value(p)[..., None] + other.grad(p) * self.value(p)[..., None]

        def hess(p):
            ga, gb = self.grad(p), other.grad(p)
            cross = ga[..., :, None] * gb[..., None, :]
            return (
                self.hess(p) * other.value(p)[..., None, None]
                + other.hess(p) * self.value(p)[..., None, None]
                + cross
                + np.swapaxes(cross, -1, -2)
            )

        return AmbientField(
            lambda p: self.value(p) * other.value(p), grad, hess, f"{self.label}*{other.label}"
        )

    __rmul__ = __mul__


def as_field(obj) -> AmbientField:
    if isinstance(obj, AmbientField):
        return obj
    if np.isscalar(obj):
        return constant(float(obj))
    raise TypeError(f"cannot turn {obj!r} into an AmbientField")


def _p(p):
    return np.asarray(p, dtype=float)


def constant(c: float) -> AmbientField:
    return AmbientField(
        lambda p: np.full(_p(p).shape[:-1], c),
        lambda p: np.zeros_like(_p(p)),
        lambda p: np.zeros(_p(p).shape + _p(p).shape[-1:]),
        f"{c:g}",
    )


def linear(a, b: float = 0.0) -> AmbientField:
    """F(p) = <a, p> + b (Euclidean pairing of ambient coordinates)."""
    a = np.asarray(a, dtype=float)
    return AmbientField(
        lambda p: _p(p) @ a + b,
        lambda p: np.broadcast_to(a, _p(p).shape).copy(),
        lambda p: np.zeros(_p(p).shape + a.shape),
        f"<{a.tolist()},p>",
    )


def quadratic(A, center=None) -> AmbientField:
    """F(p) = 1/2 (p - c)^T A (p - c) with A symmetric."""
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    c = np.zeros(A.shape[0]) if center is None else np.asarray(center, dtype=float)
    return AmbientField(
        lambda p: 0.5 * np.einsum("...i,ij,...j->...", _p(p) - c, A, _p(p) - c),
        lambda p: (_p(p) - c) @ A,
        lambda p: np.broadcast_to(A, _p(p).shape + A.shape[-1:]).copy(),
        "quadratic",
    )


def compose(outer: str, inner: AmbientField) -> AmbientField:
    """outer(inner(p)) for outer in {exp, sin, cos}."""
    funcs = {
        "exp": (np.exp, np.exp, np.exp),
        "sin": (np.sin, np.cos, lambda u: -np.sin(u)),
        "cos": (np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u)),
    }
    f0, f1, f2 = funcs[outer]

    def grad(p):
        return f1(inner.value(p))[..., None] * inner.grad(p)

    def hess(p):
        u = inner.value(p)
        g = inner.grad(p)
        return f2(u)[..., None, None] * g[..., :, None] * g[..., None, :] + f1(u)[..., None, None] * inner.hess(p)

    return AmbientField(lambda p: f0(inner.value(p)), grad, hess, f"{outer}({inner.label})")


def coordinate(i: int, dim: int) -> AmbientField:
    e = np.zeros(dim)
    e[i] = 1.0
    f = linear(e)
    return AmbientField(f.value, f.grad, f.hess, f"p{i + 1}")


def gaussian(center, sigma: float) -> AmbientField:
    """exp(-|p - c|^2 / (2 sigma^2))."""
    c = np.asarray(center, dtype=float)
    q = quadratic(-np.eye(c.size) / sigma**2, c)
    g = compose("exp", q)
    return AmbientField(g.value, g.grad, g.hess, f"gauss(c={c.tolist()},s={sigma:g})")


def periodic_bump(center, sigma: float, period: float) -> AmbientField:
    """Smooth L-periodic bump exp(sum_i (cos(k(p_i - c_i)) - 1) / (k sigma)^2), k = 2pi/L.

    Near the centre this behaves like a Gaussian of width sigma.
    """
    c = np.asarray(center, dtype=float)
    k = 2.0 * np.pi / period
    total = None
    for i in range(c.size):
        a = np.zeros(c.size)
        a[i] = k
        term = compose("cos", linear(a, -k * c[i])) - 1.0
        total = term if total is None else total + term
    g = compose("exp", (1.0 / (k * sigma) ** 2) * total)
    return AmbientField(g.value, g.grad, g.hess, f"pbump(c={c.tolist()},s={sigma:g},L={period:g})")
