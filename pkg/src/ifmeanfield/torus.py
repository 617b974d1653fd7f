"""Arithmetic on the voltage torus R/2Z and the compactly supported mollifier."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import DomainError

PERIOD = 2.0


def mod2(x):
    """Canonical representative of ``x`` in ``[0, 2)``.

    Works on scalars and arrays. Non-finite input raises :class:`DomainError`.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("mod2 requires finite input")
    r = np.mod(arr, PERIOD)
    # np.mod(-1e-17, 2) rounds to 2.0
    r = np.where(r >= PERIOD, 0.0, r)
    if r.ndim == 0:
        return float(r)
    return r


def torus_dist(a, b):
    """Geodesic distance on the torus; inputs are canonical points, result in [0, 1]."""
    # |a - b| first so that swapping the arguments gives bitwise the same value
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), PERIOD)
    d = np.minimum(d, PERIOD - d)
    if np.ndim(d) == 0:
        return float(d)
    return d


def signed_rep(v):
    """Representative of ``v`` in (-1, 1]."""
    r = np.mod(np.asarray(v, dtype=float), PERIOD)
    r = np.where(r > 1.0, r - PERIOD, r)
    if np.ndim(r) == 0:
        return float(r)
    return r


def _bump(u):
    u = np.asarray(u, dtype=float)
    s = 0.25 - u * u
    inside = s > 0.0
    safe = np.where(inside, s, 1.0)
    return np.where(inside, np.exp(-1.0 / safe) * safe * safe, 0.0)


def _bump_grad(u):
    u = np.asarray(u, dtype=float)
    s = 0.25 - u * u
    inside = s > 0.0
    safe = np.where(inside, s, 1.0)
    # d/du [exp(-1/s) s^2] with s' = -2u
    return np.where(inside, np.exp(-1.0 / safe) * (-2.0 * u) * (1.0 + 2.0 * safe), 0.0)


@lru_cache(maxsize=1)
def normalization_constant() -> float:
    """Constant making the unscaled bump a probability density (cached)."""
    mass, _ = quad(lambda u: float(_bump(u)), -0.5, 0.5, epsabs=1e-15, epsrel=1e-13, limit=200)
    return 1.0 / mass


@dataclass(frozen=True)
class MollifierFamily:
    """Scaled bump ``gamma_alpha(v) = gamma(v / alpha) / alpha`` on the torus.

    ``alpha`` must lie in (0, 1]; the support is the torus ball of radius ``alpha / 2``.
    """

    alpha: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError(f"mollifier scale must lie in (0, 1], got {self.alpha}")

    @property
    def c(self) -> float:
        return normalization_constant()

    def __call__(self, v):
        w = signed_rep(v) / self.alpha
        return self.c * _bump(w) / self.alpha

    def grad(self, v):
        w = signed_rep(v) / self.alpha
        return self.c * _bump_grad(w) / (self.alpha * self.alpha)

    def fits(self, n_particles: int) -> bool:
        return self.alpha ** -3 <= n_particles


def mollifier_eval(fam: MollifierFamily, v):
    return fam(v)


def mollifier_scale_for(n: int) -> float:
    """Largest-resolution scale with ``alpha**-3 <= n``, i.e. ``n**(-1/3)``."""
    if n < 1:
        raise DomainError("N must be a positive integer")
    alpha = 1.0 / float(np.cbrt(float(n)))
    while alpha ** -3 > n:
        alpha = math.nextafter(alpha, math.inf)
    return min(alpha, 1.0)
