"""Monte Carlo result containers and sample statistics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .stochastics import SimConfig


def _pairs(samples: np.ndarray, antithetic: bool) -> np.ndarray:
    # antithetic pairs are averaged into one independent sample
    if not antithetic:
        return samples
    return 0.5 * (samples[0::2] + samples[1::2])


@dataclass
class Estimate:
    """Mean and standard error of a Monte Carlo ensemble."""

    mean: Any
    stderr: Any
    n_paths: int
    cfg: Optional[SimConfig] = None
    seed: Optional[int] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples, cfg=None, seed=None, antithetic=False, squeeze=True, **extra):
        """samples: (n_paths,) or (n_paths, k)."""
        s = np.asarray(samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        ind = _pairs(s, antithetic)
        n = ind.shape[0]
        mean = ind.mean(axis=0)
        sd = ind.std(axis=0, ddof=1) if n > 1 else np.full(mean.shape, np.inf)
        se = sd / np.sqrt(n)
        if squeeze and mean.size == 1:
            mean, se = float(mean[0]), float(se[0])
        return cls(mean, se, s.shape[0], cfg, seed, dict(extra))

    def __repr__(self):
        return f"Estimate(mean={self.mean!r}, stderr={self.stderr!r}, n_paths={self.n_paths})"

    def as_dict(self) -> dict:
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, np.generic):
                return v.item()
            return v

        out = {"mean": conv(self.mean), "stderr": conv(self.stderr), "n_paths": self.n_paths}
        if self.cfg is not None:
            out["cfg"] = self.cfg.as_dict()
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def delta_method(samples, g: Callable, antithetic=False, eps=1e-6, grad: Optional[Callable] = None):
    """g(mean) and its delta-method standard error.

    ``samples`` is (n, k); ``g`` maps a length-k mean vector to a scalar.
    The gradient of g is ``grad(mean)`` when given, central differences
    otherwise.  The variance is that of the projected samples
    ``samples @ grad``, which equals grad^T Cov grad.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    ind = _pairs(s, antithetic)
    n, k = ind.shape
    mu = ind.mean(axis=0)
    if grad is not None:
        gvec = np.asarray(grad(mu), dtype=float)
    else:
        gvec = np.empty(k)
        for i in range(k):
            step = eps * max(1.0, abs(mu[i]))
            up, dn = mu.copy(), mu.copy()
            up[i] += step
            dn[i] -= step
            gvec[i] = (g(up) - g(dn)) / (2 * step)
    value = float(g(mu))
    if n < 2:
        return value, float("inf")
    proj = ind @ gvec
    return value, float(np.std(proj, ddof=1) / np.sqrt(n))
