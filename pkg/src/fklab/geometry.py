"""Closed-form geometry of the constant-curvature model spaces.

Points and tangent vectors are stored in an ambient representation:

* ``euclidean`` -- R^n, coordinates as they are.
* ``torus``     -- R^n / (L Z)^n, coordinates reduced to [0, L).
* ``sphere``    -- the sphere of radius R in R^{n+1}.
* ``hyperbolic``-- the upper sheet of <x, x> = -1/c in Minkowski space R^{n,1},
                   where c = ``scale`` is the magnitude of the curvature and
                   the last coordinate is the timelike one.

All operations broadcast over leading axes, so a batch of B points is an
array of shape (B, D) and a batch of frames is (B, n, D).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("euclidean", "sphere", "hyperbolic", "torus")

POINT_TOL = 1e-10
TANGENT_TOL = 1e-10


def _dot(a, b):
    # explicit sum over the (short) last axis; faster than einsum on batches
    out = a[..., 0] * b[..., 0]
    for i in range(1, a.shape[-1]):
        out = out + a[..., i] * b[..., i]
    return out


def _sinc(theta):
    # sin(theta)/theta, exact 1 at 0
    return np.sinc(theta / np.pi)


def _sinhc(theta):
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.sinh(theta) / theta
    return np.where(theta == 0.0, 1.0, out)


@dataclass(frozen=True)
class ModelManifold:
    """A model Riemannian manifold of constant sectional curvature."""

    kind: str
    dim: int
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown manifold kind {self.kind!r}; expected one of {KINDS}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    # ------------------------------------------------------------------ basics
    @property
    def ambient_dim(self) -> int:
        return self.dim + 1 if self.kind in ("sphere", "hyperbolic") else self.dim

    @property
    def curvature(self) -> float:
        if self.kind == "sphere":
            return 1.0 / self.scale**2
        if self.kind == "hyperbolic":
            return -self.scale
        return 0.0

    @property
    def ricci_factor(self) -> float:
        """(n - 1) * kappa, the constant eigenvalue of the Ricci operator."""
        return (self.dim - 1) * self.curvature

    @property
    def ricci_bounds(self) -> tuple[float, float]:
        """(K, L) with 2K <= Ric <= 2L; equal on model spaces."""
        half = 0.5 * self.ricci_factor
        return half, half

    @property
    def is_flat(self) -> bool:
        return self.kind in ("euclidean", "torus")

    @property
    def is_compact(self) -> bool:
        return self.kind in ("sphere", "torus")

    @property
    def _radius(self) -> float:
        # sphere radius, or 1/sqrt(c) for the hyperboloid
        if self.kind == "hyperbolic":
            return 1.0 / np.sqrt(self.scale)
        return self.scale

    def __str__(self):
        return f"{self.kind}{self.dim}(scale={self.scale:g})"

    def inner(self, u, w):
        """Riemannian inner product of tangent vectors (ambient components)."""
        u = np.asarray(u, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.kind == "hyperbolic":
            return _dot(u[..., :-1], w[..., :-1]) - u[..., -1] * w[..., -1]
        return _dot(u, w)

    def norm(self, w):
        return np.sqrt(np.maximum(self.inner(w, w), 0.0))

    # -------------------------------------------------------------- validation
    def _check_shape(self, a, what):
        a = np.asarray(a, dtype=float)
        if a.shape[-1:] != (self.ambient_dim,):
            raise ValueError(
                f"{what} has trailing dimension {a.shape[-1:]} but {self} "
                f"uses ambient dimension {self.ambient_dim}"
            )
        return a

    def point_error(self, p):
        """Violation of the point constraint (0 for a valid point)."""
        p = self._check_shape(p, "point")
        if self.kind == "sphere":
            return np.abs(np.linalg.norm(p, axis=-1) - self.scale)
        if self.kind == "hyperbolic":
            err = np.abs(self.inner(p, p) + 1.0 / self.scale)
            return np.where(p[..., -1] > 0, err, np.inf)
        if self.kind == "torus":
            ok = np.all((p >= 0) & (p < self.scale), axis=-1)
            return np.where(ok, 0.0, np.inf)
        return np.zeros(p.shape[:-1])

    def tangent_error(self, p, w):
        p = self._check_shape(p, "point")
        w = self._check_shape(w, "tangent")
        if self.kind == "sphere":
            return np.abs(_dot(w, p)) / self.scale
        if self.kind == "hyperbolic":
            return np.abs(self.inner(w, p)) * np.sqrt(self.scale)
        return np.zeros(np.broadcast_shapes(p.shape, w.shape)[:-1])

    def check_point(self, p, tol=POINT_TOL):
        if np.any(self.point_error(p) > tol):
            raise ValueError(f"point is not on {self}")
        return np.asarray(p, dtype=float)

    def check_tangent(self, p, w, tol=TANGENT_TOL):
        scale = np.maximum(1.0, np.max(np.abs(np.asarray(w, dtype=float)), initial=0.0))
        if np.any(self.tangent_error(p, w) > tol * scale):
            raise ValueError("vector is not tangent at the given base point")
        return np.asarray(w, dtype=float)

    # ------------------------------------------------------------- projections
    def project_point(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "sphere":
            return p * (self.scale / np.linalg.norm(p, axis=-1, keepdims=True))
        if self.kind == "hyperbolic":
            q = -self.inner(p, p)[..., None] * self.scale
            p = p / np.sqrt(q)
            return p * np.where(p[..., -1:] < 0, -1.0, 1.0)
        if self.kind == "torus":
            p = np.mod(p, self.scale)
            # mod can round up to exactly L
            return np.where(p >= self.scale, 0.0, p)
        return p

    def project_tangent(self, p, w):
        p = np.asarray(p, dtype=float)
        w = np.asarray(w, dtype=float)
        if self.kind == "sphere":
            return w - (_dot(w, p) / self.scale**2)[..., None] * p
        if self.kind == "hyperbolic":
            return w + (self.scale * self.inner(w, p))[..., None] * p
        return w

    def orthonormalize(self, p, frame):
        """Gram-Schmidt on the n vectors of ``frame`` (shape (..., n, D))."""
        frame = self.project_tangent(np.asarray(p)[..., None, :], frame)
        out = np.empty_like(frame)
        for i in range(frame.shape[-2]):
            v = frame[..., i, :]
            for j in range(i):
                v = v - self.inner(v, out[..., j, :])[..., None] * out[..., j, :]
            out[..., i, :] = v / self.norm(v)[..., None]
        return out

    # ------------------------------------------------------------------- maps
    def exp_map(self, p, v, check=True):
        """Point at time 1 on the geodesic through p with initial velocity v."""
        p = self._check_shape(p, "point")
        v = self._check_shape(v, "tangent")
        if check:
            self.check_tangent(p, v)
        if self.kind == "euclidean":
            return p + v
        if self.kind == "torus":
            return self.project_point(p + v)
        r = self._radius
        speed = self.norm(v)
        theta = speed / r
        if self.kind == "sphere":
            q = np.cos(theta)[..., None] * p + _sinc(theta)[..., None] * v
        else:
            q = np.cosh(theta)[..., None] * p + _sinhc(theta)[..., None] * v
        moved = (theta > 0)[..., None]
        return np.where(moved, self.project_point(q), p)

    def transport(self, p, v, w, check=True):
        """Parallel transport of w along s -> exp_p(s v) from s=0 to s=1."""
        p = self._check_shape(p, "point")
        v = self._check_shape(v, "tangent")
        w = self._check_shape(w, "tangent")
        if check:
            self.check_tangent(p, v)
            self.check_tangent(p, w)
        if self.is_flat:
            return np.broadcast_to(w, np.broadcast_shapes(w.shape, v.shape)).copy()
        r = self._radius
        speed = self.norm(v)
        theta = speed / r
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where((speed > 0)[..., None], v / speed[..., None], 0.0)
        e = p / r
        wu = self.inner(w, u)[..., None]
        if self.kind == "sphere":
            dw = (np.cos(theta) - 1.0)[..., None] * u - np.sin(theta)[..., None] * e
        else:
            dw = (np.cosh(theta) - 1.0)[..., None] * u + np.sinh(theta)[..., None] * e
        out = w + wu * dw
        q = self.exp_map(p, v, check=False)
        return self.project_tangent(q, out)

    def ricci_apply(self, v, p=None):
        """Ric^sharp v = (n - 1) kappa v on a model space."""
        v = self._check_shape(v, "tangent")
        if p is not None:
            self.check_tangent(p, v)
        return self.ricci_factor * v

    def distance(self, p, q):
        p = self._check_shape(p, "point")
        q = self._check_shape(q, "point")
        if self.kind == "euclidean":
            return np.linalg.norm(q - p, axis=-1)
        if self.kind == "torus":
            d = q - p
            d = d - self.scale * np.round(d / self.scale)
            return np.linalg.norm(d, axis=-1)
        r = self._radius
        if self.kind == "sphere":
            chord = np.linalg.norm(p - q, axis=-1)
            cochord = np.linalg.norm(p + q, axis=-1)
            return 2.0 * r * np.arctan2(chord, cochord)
        chord = self.norm(p - q)
        return 2.0 * r * np.arcsinh(chord / (2.0 * r))

    # ------------------------------------------------------------ frames etc.
    def base_point(self):
        """A canonical point: origin, north pole, or hyperboloid vertex."""
        p = np.zeros(self.ambient_dim)
        if self.kind in ("sphere", "hyperbolic"):
            p[-1] = self._radius
        return p

    def frame_at(self, p):
        """A canonical orthonormal frame of T_pM, shape (..., n, D)."""
        p = self._check_shape(p, "point")
        n, dim = self.dim, self.ambient_dim
        eye = np.eye(dim)
        if self.is_flat:
            return np.broadcast_to(eye, p.shape[:-1] + (n, dim)).copy()
        if self.kind == "hyperbolic":
            cand = np.broadcast_to(eye[:n], p.shape[:-1] + (n, dim))
        else:
            # drop the basis vector most aligned with p
            idx = np.sort(np.argsort(np.abs(p), axis=-1, kind="stable")[..., :n], axis=-1)
            cand = eye[idx]
        return self.orthonormalize(p, cand)

    def tangent_from_frame(self, frame, coords):
        """sum_i coords_i frame_i."""
        return np.einsum("...i,...id->...d", np.asarray(coords, dtype=float), frame)

    def frame_coords(self, frame, w):
        """Components <w, frame_i>."""
        return self.inner(np.asarray(w)[..., None, :], frame)

    # ----------------------------------------------- calculus of ambient fields
    def gradient(self, p, dF):
        """Riemannian gradient from the ambient (Euclidean) partials dF."""
        dF = np.asarray(dF, dtype=float)
        if self.kind == "hyperbolic":
            dF = np.concatenate([dF[..., :-1], -dF[..., -1:]], axis=-1)
        return self.project_tangent(p, dF)

    def covector_norm(self, p, dF):
        return self.norm(self.gradient(p, dF))

    def laplacian(self, p, dF, hess):
        """Laplace-Beltrami of an ambient function from its partials."""
        p = np.asarray(p, dtype=float)
        dF = np.asarray(dF, dtype=float)
        hess = np.asarray(hess, dtype=float)
        tr = np.trace(hess, axis1=-2, axis2=-1)
        if self.is_flat:
            return tr
        r = self._radius
        nu = p / r
        hnn = np.einsum("...i,...ij,...j->...", nu, hess, nu)
        dn = _dot(dF, nu)
        if self.kind == "sphere":
            return tr - hnn - self.dim / r * dn
        box = tr - 2.0 * hess[..., -1, -1]
        return box + hnn + self.dim / r * dn

    # --------------------------------------------------------------- sampling
    def random_point(self, rng, size=None, spread=1.0):
        shape = (() if size is None else (size,)) + (self.ambient_dim,)
        if self.kind == "euclidean":
            return spread * rng.standard_normal(shape)
        if self.kind == "torus":
            return self.project_point(self.scale * rng.random(shape))
        if self.kind == "sphere":
            return self.project_point(rng.standard_normal(shape))
        base = np.broadcast_to(self.base_point(), shape)
        v = spread * rng.standard_normal(shape)
        v[..., -1] = 0.0
        return self.exp_map(base, v)

    def random_tangent(self, rng, p, spread=1.0):
        p = self._check_shape(p, "point")
        coords = spread * rng.standard_normal(p.shape[:-1] + (self.dim,))
        return self.tangent_from_frame(self.frame_at(p), coords)
