"""Decoupled McKean-Vlasov particles driven by a precomputed Fokker-Planck path."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RangeError
from .laws import N_POSITION_UNIFORMS
from .streams import N_INIT_UNIFORMS, ParticleStreams
from .torus import mod2


@dataclass
class MkvSamples:
    """Sample cloud: fixed positions (one atom of the driving path each) and voltages."""

    times: np.ndarray
    atom_index: np.ndarray
    positions: np.ndarray
    voltages: np.ndarray  # (n_times, n_samples), unwrapped

    @property
    def canonical(self) -> np.ndarray:
        return mod2(self.voltages)

    def at(self, t: float) -> np.ndarray:
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9:
            raise RangeError(f"no samples recorded at t={t}")
        return self.canonical[j]


def mkv_simulate(mu_path, coeffs, n_samples: int, seed: int, output_times=None,
                 dt: float = 1e-3, replica: int = 0, chunk: int = 256, rho0=None) -> MkvSamples:
    """Euler paths of ``dV = b(mu_t)(X, V) dt + sigma(V) dB`` with ``X`` drawn from the path's atoms.

    The drift uses the snapshot at or before the current time (piecewise
    constant in t); snapshots must be at most ``10 dt`` apart. Initial
    voltages come from the path's first snapshot, or from ``rho0`` when given.
    Randomness follows the particle simulator's per-sample stream layout, so
    with zero coupling and ``rho0`` set, sample ``i`` reproduces particle ``i``
    of :func:`simulate` exactly.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be positive")
    snap_t = np.array([p.time for p in mu_path])
    if len(snap_t) > 1 and np.max(np.diff(snap_t)) > 10 * dt + 1e-12:
        raise ConfigError("driving path snapshots must be at most 10 dt apart")
    horizon = float(snap_t[-1])
    if output_times is None:
        output_times = [horizon]
    output_times = sorted(float(t) for t in output_times)
    if output_times[-1] > horizon + 1e-12 or output_times[0] < snap_t[0] - 1e-12:
        raise RangeError(f"requested time beyond the driving path horizon {horizon}")

    first = mu_path[0]
    theta_matrix = coeffs.theta(first.positions, first.positions)
    inter = []
    for mu in mu_path:
        pf = mu.weights * mu.firing_masses(coeffs)
        inter.append((theta_matrix * pf[None, :]).sum(axis=1))
    inter = np.array(inter)

    streams = ParticleStreams(seed, replica, np.arange(n_samples))
    u = streams.uniforms(N_INIT_UNIFORMS)
    cdf = np.cumsum(first.weights)
    atom = np.minimum(np.searchsorted(cdf / cdf[-1], u[:, 3], side="right"), len(cdf) - 1)
    if rho0 is not None:
        v = rho0.sample(u[:, N_POSITION_UNIFORMS])
    else:
        v = _sample_rows(first, atom, u[:, N_POSITION_UNIFORMS])

    steps_out = [round(t / dt) for t in output_times]
    n_steps = max(steps_out)
    out, want = [], iter(steps_out)
    nxt = next(want, None)
    sqdt = math.sqrt(dt)
    z = None
    snap_idx = 0
    for s in range(n_steps + 1):
        while nxt is not None and nxt == s:
            out.append(v.copy())
            nxt = next(want, None)
        if s == n_steps:
            break
        t = s * dt
        while snap_idx + 1 < len(snap_t) and snap_t[snap_idx + 1] <= t + 1e-12:
            snap_idx += 1
        if s % chunk == 0:
            z = streams.normals(min(chunk, n_steps - s))
        vc = mod2(v)
        drift = coeffs.lam(vc) + coeffs.charging(vc) * inter[snap_idx][atom]
        v = v + drift * dt + coeffs.sigma(vc) * sqdt * z[s % chunk]
    return MkvSamples(np.array(output_times), atom, first.positions[atom], np.array(out))


def _sample_rows(state, atom, u):
    """Inverse-cdf draw from the piecewise-constant row density of each sample's atom."""
    h = state.h
    cum = np.concatenate([np.zeros((state.rho.shape[0], 1)), np.cumsum(state.rho * h, axis=1)], axis=1)
    cum /= cum[:, -1:]
    rows = cum[atom]
    k = np.array([np.searchsorted(r, x, side="right") - 1 for r, x in zip(rows, u)])
    k = np.clip(k, 0, state.k - 1)
    lo = rows[np.arange(len(u)), k]
    hi = rows[np.arange(len(u)), k + 1]
    frac = np.where(hi > lo, (u - lo) / np.where(hi > lo, hi - lo, 1.0), 0.5)
    return np.minimum((k + frac) * h, np.nextafter(2.0, 0.0))
