"""Empirical measures, mollified densities and the norms used as convergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .torus import PERIOD, MollifierFamily, signed_rep
from .wasserstein import wasserstein1_v

# K >= 64 / alpha puts 32 midpoints across the support; the midpoint mass is then 1 to ~1e-9
POINTS_PER_ALPHA = 64


@dataclass(frozen=True)
class WeightedAtomMeasure:
    """Finitely supported probability measure on D x T."""

    positions: np.ndarray
    v: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if not (len(self.positions) == len(self.v) == len(self.weights)):
            raise ContractError("atoms and weights must have equal length")
        if np.any(self.weights < 0) or abs(float(np.sum(self.weights)) - 1.0) > 1e-12:
            raise ContractError("atom weights must be nonnegative and sum to 1")

    @classmethod
    def uniform(cls, positions, v) -> WeightedAtomMeasure:
        v = np.asarray(v, dtype=float)
        return cls(np.atleast_2d(np.asarray(positions, dtype=float)), v, np.full(len(v), 1.0 / len(v)))

    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def interaction(self, x, coeffs) -> np.ndarray:
        fire = coeffs.firing(self.v) > 0
        if not np.any(fire):
            return np.zeros(len(np.atleast_2d(x)))
        return (coeffs.theta(x, self.positions[fire]) * self.weights[fire][None, :]).sum(axis=1)

    def drift(self, coeffs) -> np.ndarray:
        """Mean-field drift evaluated at every atom."""
        return coeffs.lam(self.v) + coeffs.charging(self.v) * self.interaction(self.positions, coeffs)

    def pair(self, fn) -> float:
        """``<mu, f>`` for a callable ``f(x, v)``."""
        return float(np.dot(self.weights, fn(self.positions, self.v)))

    def circle_repr(self):
        return ("atoms", self.v, self.weights)


def empirical_measure(state) -> WeightedAtomMeasure:
    """Empirical measure of a particle state: mass 1/N at each (position, canonical voltage)."""
    return WeightedAtomMeasure.uniform(state.positions, state.canonical)


@dataclass(frozen=True)
class EmpiricalDensity:
    """Density samples at the K cell midpoints of a uniform grid on T."""

    values: np.ndarray
    alpha: float | None = None

    @property
    def k(self) -> int:
        return len(self.values)

    @property
    def h(self) -> float:
        return PERIOD / len(self.values)

    @property
    def grid(self) -> np.ndarray:
        return (np.arange(self.k) + 0.5) * self.h

    def mass(self) -> float:
        return float(self.h * np.sum(self.values))

    def circle_repr(self):
        return ("grid", np.asarray(self.values, dtype=float))


def mollified_density(meas, grid_k: int, alpha: float) -> EmpiricalDensity:
    """Samples of ``sum_i w_i gamma_alpha(v - v_i)`` at the grid midpoints.

    Requires ``grid_k >= 64 / alpha`` so the midpoint mass is 1 to ~1e-9.
    """
    fam = MollifierFamily(alpha)
    if grid_k < POINTS_PER_ALPHA / alpha:
        raise ConfigError(f"grid K={grid_k} under-resolves mollifier alpha={alpha}; need K >= {POINTS_PER_ALPHA}/alpha")
    v, w = (meas.v, meas.weights) if hasattr(meas, "weights") else meas
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    h = PERIOD / grid_k
    reach = int(math.ceil(0.5 * alpha / h)) + 1
    offsets = np.arange(-reach, reach + 1)
    out = np.zeros(grid_k)
    for start in range(0, len(v), 4096):
        vs, ws = v[start:start + 4096], w[start:start + 4096]
        base = np.floor(vs / h).astype(np.int64)
        idx = (base[:, None] + offsets[None, :]) % grid_k
        diff = signed_rep((idx + 0.5) * h - vs[:, None])
        vals = fam(diff) * ws[:, None]
        out += np.bincount(idx.ravel(), weights=vals.ravel(), minlength=grid_k)
    return EmpiricalDensity(out, alpha)


def l2_energy(dens) -> tuple[float, float]:
    """Midpoint quadrature of ``int u^2`` and of ``int |u'|^2`` (periodic central differences)."""
    u = np.asarray(getattr(dens, "values", dens), dtype=float)
    if len(u) < 8:
        raise ConfigError("l2_energy needs at least 8 grid cells")
    h = PERIOD / len(u)
    du = (np.roll(u, -1) - np.roll(u, 1)) / (2.0 * h)
    return float(h * np.sum(u * u)), float(h * np.sum(du * du))


def h_minus2_norm_sq(f) -> float:
    """Squared H^-2 norm on the period-2 torus.

    Coefficients are taken in the orthonormal basis ``exp(i pi k v)/sqrt(2)``,
    so Parseval holds, and weighted by ``(1 + (pi k)^2)^-2``.
    """
    u = np.asarray(getattr(f, "values", f), dtype=float)
    k = len(u)
    if k < 8:
        raise ConfigError("h_minus2_norm needs at least 8 grid cells")
    coef = np.sqrt(2.0) * np.fft.fft(u) / k
    freq = np.fft.fftfreq(k, d=1.0 / k)
    return float(np.sum(np.abs(coef) ** 2 / (1.0 + (np.pi * freq) ** 2) ** 2))


def h_minus2_norm(f) -> float:
    return math.sqrt(h_minus2_norm_sq(f))


def time_regularity(densities, times, alpha: float) -> float:
    """Off-diagonal quadrature of ``int int ||u_t - u_s||^2_{H^-2} / |t - s|^(1 + 2 alpha)``."""
    times = np.asarray(times, dtype=float)
    vals = [np.asarray(getattr(d, "values", d), dtype=float) for d in densities]
    dt = np.diff(times)
    if len(times) < 2 or np.ptp(dt) > 1e-9 * dt.mean():
        raise ConfigError("time grid must be uniform with at least two points")
    total = 0.0
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            total += 2.0 * h_minus2_norm_sq(vals[i] - vals[j]) / (times[j] - times[i]) ** (1.0 + 2.0 * alpha)
    return total * dt.mean() ** 2


def martingale_functional(traj, phi, coeffs) -> tuple[np.ndarray, np.ndarray, float]:
    """Discrete stochastic integral ``M_t = int (1/N) sum sigma(V) d_v phi(X, V) dB``.

    Uses the Brownian increments recorded by ``simulate(..., record=True)``.
    Returns ``(times, M, sup_t |M_t|)``.
    """
    if traj.dense_increments is None or traj.dense_canonical is None:
        raise ConfigError("trajectory was simulated without record=True; increments are missing")
    v = traj.dense_canonical[:-1]
    a = phi.a(traj.positions)
    integrand = coeffs.sigma(v) * phi.de(v) * a[None, :]
    dm = np.mean(integrand * traj.dense_increments, axis=1)
    m = np.concatenate([[0.0], np.cumsum(dm)])
    return traj.dense_times, m, float(np.max(np.abs(m)))


class MartingaleAccumulator:
    """Streaming version of :func:`martingale_functional` for use as a ``simulate`` observer."""

    def __init__(self, phi, coeffs):
        self.phi, self.coeffs = phi, coeffs
        self.value = 0.0
        self.sup = 0.0
        self._a = None

    def __call__(self, state, dw):
        if self._a is None:
            self._a = self.phi.a(state.positions)
        v = state.canonical
        self.value += float(np.mean(self.coeffs.sigma(v) * self.phi.de(v) * self._a * dw))
        self.sup = max(self.sup, abs(self.value))


def w1_holder_modulus(measure_path, times, alpha: float, p: float) -> float:
    """Off-diagonal quadrature of ``int int W1(mu_t, mu_s)^p / |t - s|^(1 + alpha p)``.

    Distances are between v-marginals; pairs closer than one grid step are excluded.
    """
    if not (p > 2 and 0 < alpha and alpha * p < p / 2 - 1):
        raise ConfigError("need p > 2 and 0 < alpha * p < p/2 - 1")
    times = np.asarray(times, dtype=float)
    dt = np.diff(times)
    if len(times) < 2 or np.ptp(dt) > 1e-9 * dt.mean():
        raise ConfigError("time grid must be uniform with at least two points")
    total = 0.0
    for i in range(len(times)):
        for j in range(i + 1, len(times)):
            w = wasserstein1_v(measure_path[i], measure_path[j])
            total += 2.0 * w**p / (times[j] - times[i]) ** (1.0 + alpha * p)
    return total * dt.mean() ** 2
