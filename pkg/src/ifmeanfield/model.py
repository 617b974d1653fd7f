"""Model coefficients: discharge drift, noise profile, spatial kernel, mean-field drift.

Any object exposing ``lam``, ``sigma``, ``charging``, ``firing``, ``theta`` and
``drift_bound`` (bounded drift whose discontinuities form a null set, C^1 bounded
diffusion) can stand in for :class:`ModelCoefficients`; the simulator and solver
only go through that surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, ContractError
from .torus import mod2

DRIFT_VARIANTS = ("standard", "zero", "smooth")


@dataclass(frozen=True)
class ThetaKernel:
    """Spatial coupling strength theta(x, y)."""

    kind: str = "gaussian"
    theta0: float = 0.0
    length: float = 1.0
    atoms: tuple | None = None
    matrix: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "gaussian", "block"):
            raise ConfigError(f"unknown theta kernel {self.kind!r}")
        if self.kind == "block":
            if self.atoms is None or self.matrix is None:
                raise ConfigError("block kernel needs atoms and matrix")
            atoms = np.asarray(self.atoms, dtype=float)
            mat = np.asarray(self.matrix, dtype=float)
            if atoms.ndim != 2 or atoms.shape[1] != 3 or mat.shape != (len(atoms), len(atoms)):
                raise ConfigError("block kernel: atoms must be (A, 3) and matrix (A, A)")
            if np.any(mat < 0):
                raise ConfigError("block kernel entries must be nonnegative")
        else:
            if self.theta0 < 0:
                raise ConfigError("theta0 must be nonnegative")
            if self.kind == "gaussian" and self.length <= 0:
                raise ConfigError("gaussian kernel length must be positive")

    @classmethod
    def constant(cls, theta0: float) -> ThetaKernel:
        return cls(kind="constant", theta0=float(theta0))

    @classmethod
    def gaussian(cls, theta0: float, length: float) -> ThetaKernel:
        return cls(kind="gaussian", theta0=float(theta0), length=float(length))

    @classmethod
    def block(cls, atoms, matrix) -> ThetaKernel:
        atoms = tuple(tuple(float(c) for c in a) for a in np.asarray(atoms, dtype=float))
        matrix = tuple(tuple(float(c) for c in row) for row in np.asarray(matrix, dtype=float))
        return cls(kind="block", atoms=atoms, matrix=matrix)

    @property
    def sup_norm(self) -> float:
        if self.kind == "block":
            return float(np.max(self.matrix_array)) if len(self.matrix) else 0.0
        return self.theta0

    @property
    def atoms_array(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float)

    @property
    def matrix_array(self) -> np.ndarray:
        return np.asarray(self.matrix, dtype=float)

    def atom_index(self, x) -> np.ndarray:
        """Index of the block atom each position coincides with."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        dist, idx = cKDTree(self.atoms_array).query(x)
        if np.any(dist > 1e-9):
            raise ConfigError("block kernel evaluated off its atom set")
        return idx

    def __call__(self, x, y) -> np.ndarray:
        """Matrix ``theta(x_i, y_j)`` for position arrays of shape (n, 3) and (m, 3)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.kind == "constant":
            return np.full((len(x), len(y)), self.theta0)
        if self.kind == "gaussian":
            d2 = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=-1)
            return self.theta0 * np.exp(-d2 / (2.0 * self.length**2))
        return self.matrix_array[np.ix_(self.atom_index(x), self.atom_index(y))]


@dataclass(frozen=True)
class SigmaProfile:
    """Noise amplitude: floor sqrt(2 eps) plus a C^1 bump supported in (0, 1)."""

    epsilon: float
    bump_amplitude: float = 0.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.bump_amplitude < 0:
            raise ConfigError("bump amplitude must be nonnegative")

    @property
    def floor(self) -> float:
        return math.sqrt(2.0 * self.epsilon)

    @property
    def sup(self) -> float:
        return self.floor + self.bump_amplitude

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        bump = np.where(v <= 1.0, 16.0 * v * v * (1.0 - v) ** 2, 0.0)
        return self.floor + self.bump_amplitude * bump

    def grad(self, v):
        v = np.asarray(v, dtype=float)
        d = np.where(v <= 1.0, 32.0 * v * (1.0 - v) * (1.0 - 2.0 * v), 0.0)
        return self.bump_amplitude * d


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


@dataclass(frozen=True)
class ModelCoefficients:
    """All scalar model parameters plus the coupling kernel.

    ``drift_variant`` selects the discharge drift: ``standard`` (the
    discontinuous integrate-and-fire drift), ``zero`` (no drift, used by
    diffusion oracles) or ``smooth`` (C^1 blend of width ``smooth_width``
    across both jumps, used by the strong-order study).
    """

    lambda_hat: float = 1.0
    epsilon: float = 0.02
    delta: float = 0.3
    theta_kernel: ThetaKernel = field(default_factory=lambda: ThetaKernel.gaussian(2.0, 0.3))
    sigma_bump: float = 0.0
    horizon: float = 1.0
    drift_variant: str = "standard"
    smooth_width: float = 0.2

    def __post_init__(self):
        if not self.lambda_hat > 0:
            raise ConfigError("lambda_hat must be positive")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError("delta must lie in (0, 1)")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if self.drift_variant not in DRIFT_VARIANTS:
            raise ConfigError(f"drift_variant must be one of {DRIFT_VARIANTS}")
        if not (0.0 < self.smooth_width < 0.5):
            raise ConfigError("smooth_width must lie in (0, 0.5)")
        SigmaProfile(self.epsilon, self.sigma_bump)

    @property
    def sigma_profile(self) -> SigmaProfile:
        return SigmaProfile(self.epsilon, self.sigma_bump)

    @property
    def theta(self) -> ThetaKernel:
        return self.theta_kernel

    @property
    def drift_bound(self) -> float:
        return max(self.lambda_hat, 1.0) + self.theta_kernel.sup_norm

    def lam(self, v):
        v = np.asarray(v, dtype=float)
        if self.drift_variant == "zero":
            return np.zeros_like(v)
        if self.drift_variant == "smooth":
            w = self.smooth_width
            charge = np.where(v < 1.5, -self.lambda_hat * v, -self.lambda_hat * (v - 2.0))
            refr = np.where(
                v < 1.5,
                _smoothstep((v - 1.0 + w / 2) / w) + 1.0 - _smoothstep((v + w / 2) / w),
                1.0 - _smoothstep((v - 2.0 + w / 2) / w),
            )
            return (1.0 - refr) * charge + refr
        return np.where(v <= 1.0, -self.lambda_hat * v, 1.0)

    def sigma(self, v):
        return self.sigma_profile(v)

    def charging(self, v):
        v = np.asarray(v, dtype=float)
        return ((v >= 0.0) & (v <= 1.0)).astype(float)

    def firing(self, w):
        w = np.asarray(w, dtype=float)
        return ((w >= 1.0) & (w <= 1.0 + self.delta)).astype(float)


def lambda2(v, coeffs):
    return _scalar(coeffs.lam(mod2(v)))


def sigma2(v, coeffs):
    return _scalar(coeffs.sigma(mod2(v)))


def g2(x, v, y, w, coeffs):
    theta = coeffs.theta(np.reshape(x, (1, 3)), np.reshape(y, (1, 3)))[0, 0]
    return float(theta * coeffs.firing(mod2(w)) * coeffs.charging(mod2(v)))


def drift_b(measure, x, v, coeffs):
    """Mean-field drift ``b(measure)(x, v)``.

    ``measure`` is anything with ``total_mass()`` and ``interaction(x, coeffs)``
    (the latter returning the integral of theta(x, y) * firing(w)).
    """
    mass = measure.total_mass()
    if abs(mass - 1.0) > 1e-8:
        raise ContractError(f"drift evaluated against a measure of mass {mass}")
    v = mod2(v)
    inter = measure.interaction(np.reshape(x, (-1, 3)), coeffs)
    if np.ndim(v) == 0:
        inter = inter[0]
    return _scalar(coeffs.lam(v) + coeffs.charging(v) * inter)


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a
