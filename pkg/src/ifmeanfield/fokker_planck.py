"""Finite-volume solver for the nonlinear Fokker-Planck equation on D x T.

Positions never move, so the measure is stored as M position atoms times a
K-cell voltage grid: M one-dimensional equations coupled only through the
firing masses ``F_m`` (mass of row m inside the post-spike window).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, StepSizeError
from .laws import InitialLaws, N_POSITION_UNIFORMS
from .streams import ParticleStreams
from .torus import PERIOD

CFL_SAFETY = 0.4
# replica index reserved for the solver's own draws of position atoms
PDE_ATOM_REPLICA = 2**31


def cell_centers(k: int) -> np.ndarray:
    return (np.arange(k) + 0.5) * (PERIOD / k)


def window_overlap(k: int, lo: float, hi: float) -> np.ndarray:
    """Length of each grid cell's intersection with [lo, hi]."""
    edges = np.linspace(0.0, PERIOD, k + 1)
    return np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)


@dataclass(frozen=True)
class ConditionalGridDensity:
    """Row m holds the conditional voltage density at position atom m."""

    positions: np.ndarray
    weights: np.ndarray
    rho: np.ndarray
    time: float = 0.0

    @property
    def k(self) -> int:
        return self.rho.shape[1]

    @property
    def h(self) -> float:
        return PERIOD / self.k

    @property
    def centers(self) -> np.ndarray:
        return cell_centers(self.k)

    def row_masses(self) -> np.ndarray:
        return self.h * self.rho.sum(axis=1)

    def total_mass(self) -> float:
        return float(np.dot(self.weights, self.row_masses()))

    def firing_masses(self, coeffs) -> np.ndarray:
        return self.rho @ window_overlap(self.k, 1.0, 1.0 + coeffs.delta)

    def interaction(self, x, coeffs) -> np.ndarray:
        pf = self.weights * self.firing_masses(coeffs)
        return (coeffs.theta(x, self.positions) * pf[None, :]).sum(axis=1)

    def drift(self, coeffs, theta_matrix=None) -> np.ndarray:
        """Mean-field drift ``b(mu)(x_m, v_k)`` on the (M, K) grid."""
        v = self.centers
        if theta_matrix is None:
            inter = self.interaction(self.positions, coeffs)
        else:
            pf = self.weights * self.firing_masses(coeffs)
            inter = (theta_matrix * pf[None, :]).sum(axis=1)
        return coeffs.lam(v)[None, :] + coeffs.charging(v)[None, :] * inter[:, None]

    def v_density(self) -> np.ndarray:
        return (self.weights[:, None] * self.rho).sum(axis=0)

    def circle_repr(self):
        return ("grid", self.v_density())

    def pair_values(self, values) -> float:
        """``<mu, f>`` for ``f`` given on the (M, K) grid or as a length-K v-profile."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        return float(self.h * np.sum(self.weights[:, None] * self.rho * values))

    def pair(self, phi) -> float:
        return self.pair_values(phi.a(self.positions)[:, None] * phi.e(self.centers)[None, :])


def discretize_initial(laws: InitialLaws, m: int, k: int, seed: int = 0) -> ConditionalGridDensity:
    """Product initial condition: M position atoms times cell averages of rho0."""
    if m < 2 and laws.nu.kind != "atoms" or k < 2:
        raise ConfigError("need M, K >= 2")
    nu = laws.nu
    if nu.kind == "atoms":
        positions = nu.atoms_array.copy()
        weights = nu.atom_weights
    else:
        streams = ParticleStreams(seed, PDE_ATOM_REPLICA, np.arange(m))
        positions = nu.sample(streams.uniforms(N_POSITION_UNIFORMS))
        weights = np.full(m, 1.0 / m)
    row = laws.rho0.cell_averages(k)
    rho = np.tile(row, (len(positions), 1))
    return ConditionalGridDensity(positions, weights, rho, 0.0)


def max_stable_dt(k: int, coeffs, drift_sup: float | None = None) -> float:
    h = PERIOD / k
    smax = float(np.max(coeffs.sigma(cell_centers(k))))
    bmax = coeffs.drift_bound if drift_sup is None else drift_sup
    limits = [h * h / smax**2]
    if bmax > 0:
        limits.append(h / bmax)
    return CFL_SAFETY * min(limits)


def _face_flux(rho, drift, diff):
    """Numerical flux through the right face of every cell (periodic).

    Hybrid differencing: central advective flux where the cell Peclet number
    ``|b| h / (2 D)`` is at most 1 (the stencil stays monotone), first-order
    upwind elsewhere.
    """
    h = PERIOD / rho.shape[1]
    bf = 0.5 * (drift + np.roll(drift, -1, axis=1))
    right = np.roll(rho, -1, axis=1)
    upwind = np.maximum(bf, 0.0) * rho + np.minimum(bf, 0.0) * right
    central = 0.5 * bf * (rho + right)
    dmin = np.minimum(diff, np.roll(diff, -1))[None, :]
    adv = np.where(np.abs(bf) * h <= 2.0 * dmin, central, upwind)
    u = diff[None, :] * rho
    return adv - (np.roll(u, -1, axis=1) - u) / h


def fp_step(state: ConditionalGridDensity, dt: float, coeffs, theta_matrix=None) -> ConditionalGridDensity:
    """One explicit conservative finite-volume step.

    Face velocities are the mean of the adjacent cell drifts, which stays
    consistent across the jumps of the drift; advection uses hybrid
    central/upwind fluxes and diffusion discretizes ``d^2(D rho)`` centrally
    with ``D = sigma^2 / 2``.
    """
    drift = state.drift(coeffs, theta_matrix)
    v = state.centers
    diff = 0.5 * coeffs.sigma(v) ** 2
    h = state.h
    bmax = float(np.max(np.abs(drift))) if drift.size else 0.0
    limit = CFL_SAFETY * min(h * h / (2.0 * diff.max()), h / bmax if bmax > 0 else math.inf)
    if dt > limit * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} exceeds the stability bound {limit}")
    flux = _face_flux(state.rho, drift, diff)
    rho = state.rho - (dt / h) * (flux - np.roll(flux, 1, axis=1))
    return replace(state, rho=rho, time=state.time + dt)


def fp_solve(initial: ConditionalGridDensity, t_end: float, coeffs, output_times=None,
             dt_max: float | None = None) -> list[ConditionalGridDensity]:
    """Integrate to ``t_end`` and return snapshots at ``output_times`` (default: 0 and t_end).

    Each interval between consecutive output times is split into equal steps
    no larger than the stable step.
    """
    if output_times is None:
        output_times = [0.0, t_end]
    times = sorted({float(t) for t in output_times})
    if times and (times[0] < initial.time - 1e-12 or times[-1] > t_end + 1e-12):
        raise ConfigError("output times must lie within [initial time, t_end]")
    limit = max_stable_dt(initial.k, coeffs)
    dt_max = limit if dt_max is None else min(dt_max, limit)
    theta_matrix = coeffs.theta(initial.positions, initial.positions)
    state = initial
    out = []
    t0 = initial.time
    for t in times:
        span = t - t0
        n = int(math.ceil(span / dt_max - 1e-9)) if span > 0 else 0
        if n:
            dt = span / n
            for _ in range(n):
                state = fp_step(state, dt, coeffs, theta_matrix)
        state = replace(state, time=t)
        out.append(state)
        t0 = t
    return out


def total_firing_mass(state: ConditionalGridDensity, coeffs) -> float:
    return float(np.dot(state.weights, state.firing_masses(coeffs)))


class DiffusionSemigroup:
    """Semigroup of ``A = (sigma^2/2) d^2/dv^2`` discretized on the K-cell grid.

    The generator uses the same three-point stencil as the solver's diffusion
    term (its discrete adjoint) and is exponentiated exactly via the symmetric
    similarity transform ``sqrt(D) L sqrt(D)``.
    """

    def __init__(self, coeffs, k: int):
        self.k = k
        self.h = PERIOD / k
        v = cell_centers(k)
        self.diff = 0.5 * coeffs.sigma(v) ** 2
        lap = (np.roll(np.eye(k), 1, axis=1) + np.roll(np.eye(k), -1, axis=1) - 2 * np.eye(k)) / self.h**2
        sq = np.sqrt(self.diff)
        evals, evecs = np.linalg.eigh(sq[:, None] * lap * sq[None, :])
        self._evals = np.minimum(evals, 0.0)
        self._left = sq[:, None] * evecs
        self._right = evecs.T / sq[None, :]

    def operator(self, t: float) -> np.ndarray:
        return (self._left * np.exp(t * self._evals)[None, :]) @ self._right

    def coefficients(self, values) -> np.ndarray:
        return self._right @ np.asarray(values, dtype=float)

    def from_coefficients(self, coef, t: float) -> np.ndarray:
        return self._left @ (np.exp(t * self._evals) * coef)

    def apply(self, values, t: float) -> np.ndarray:
        if t == 0:
            return np.asarray(values, dtype=float).copy()
        return self.from_coefficients(self.coefficients(values), t)

    def grad(self, values) -> np.ndarray:
        return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * self.h)


@dataclass(frozen=True)
class SemigroupResult:
    values: np.ndarray
    grad: np.ndarray


def semigroup_apply(phi, t: float, coeffs, k: int = 400, semigroup: DiffusionSemigroup | None = None) -> SemigroupResult:
    """``T_t`` applied to the v-part of ``phi`` on the grid midpoints, with its v-derivative.

    The spatial factor ``a(x)`` commutes with ``T_t`` and is left to the caller.
    """
    sg = semigroup or DiffusionSemigroup(coeffs, k)
    v = cell_centers(sg.k)
    if t == 0:
        return SemigroupResult(phi.e(v), phi.de(v))
    vals = sg.apply(phi.e(v), t)
    return SemigroupResult(vals, sg.grad(vals))


def _trapezoid_weights(s: np.ndarray) -> np.ndarray:
    w = np.zeros(len(s))
    if len(s) > 1:
        ds = np.diff(s)
        w[:-1] += ds / 2
        w[1:] += ds / 2
    return w


def mild_residual(path, phi, t: float, coeffs, semigroup: DiffusionSemigroup | None = None) -> float:
    """``|<mu_t, phi> - <mu_0, T_t phi> - int_0^t <mu_s, b(mu_s) d_v T_{t-s} phi> ds|`` (trapezoid in s)."""
    times = np.array([p.time for p in path])
    j = int(np.argmin(np.abs(times - t)))
    if abs(times[j] - t) > 1e-9:
        raise ConfigError(f"path has no snapshot at t={t}")
    if t == 0:
        return 0.0
    sub = path[: j + 1]
    s = times[: j + 1]
    sg = semigroup or DiffusionSemigroup(coeffs, path[0].k)
    v = cell_centers(sg.k)
    coef = sg.coefficients(phi.e(v))
    theta_matrix = coeffs.theta(path[0].positions, path[0].positions)
    weights = _trapezoid_weights(s)
    integral = 0.0
    for mu, si, wi in zip(sub, s, weights):
        if wi == 0:
            continue
        tau = t - si
        psi = sg.from_coefficients(coef, tau) if tau > 0 else phi.e(v)
        dpsi = sg.grad(psi) if tau > 0 else phi.de(v)
        a = phi.a(mu.positions)
        integral += wi * mu.pair_values(a[:, None] * mu.drift(coeffs, theta_matrix) * dpsi[None, :])
    mu0 = path[0]
    t_phi = sg.from_coefficients(coef, t)
    lhs = mu0.pair_values(phi.a(mu0.positions)[:, None] * t_phi[None, :])
    return abs(sub[-1].pair(phi) - lhs - integral)


def weak_residual_phi(path, times, mu0, phi, coeffs) -> float:
    """Capped sup over the time grid of the weak-form defect.

    ``path`` is a sequence of :class:`ConditionalGridDensity` or of
    :class:`~ifmeanfield.measures.WeightedAtomMeasure`. Time integrals use the
    trapezoid rule on grid paths and the left-point rule on particle paths
    (the latter matches the Ito sums of an Euler trajectory).
    """
    times = np.asarray(times, dtype=float)
    base = mu0.pair(phi)
    integrand = np.array([_generator_term(mu, phi, coeffs) for mu in path])
    if isinstance(path[0], ConditionalGridDensity):
        incr = 0.5 * (integrand[:-1] + integrand[1:]) * np.diff(times)
    else:
        incr = integrand[:-1] * np.diff(times)
    cum = np.concatenate([[0.0], np.cumsum(incr)])
    values = np.array([mu.pair(phi) for mu in path])
    return float(min(np.max(np.abs(values - base - cum)), 1.0))


def _generator_term(mu, phi, coeffs) -> float:
    """``<mu, b(mu) d_v phi + (sigma^2/2) d_v^2 phi>``."""
    if isinstance(mu, ConditionalGridDensity):
        v = mu.centers
        a = phi.a(mu.positions)[:, None]
        vals = a * (mu.drift(coeffs) * phi.de(v)[None, :] + (0.5 * coeffs.sigma(v) ** 2 * phi.dde(v))[None, :])
        return mu.pair_values(vals)
    a = phi.a(mu.positions)
    vals = a * (mu.drift(coeffs) * phi.de(mu.v) + 0.5 * coeffs.sigma(mu.v) ** 2 * phi.dde(mu.v))
    return float(np.dot(mu.weights, vals))
