"""Euler-Maruyama simulation of the N-neuron system on the voltage torus."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, ContractError
from .laws import InitialLaws, N_POSITION_UNIFORMS
from .model import ModelCoefficients
from .streams import N_INIT_UNIFORMS, ParticleStreams
from .torus import mod2

INTERACTION_MODES = ("exact", "binned")
# exp(-r^2 / 2l^2) < 2**-60 beyond this many kernel lengths
_GAUSS_CUTOFF = math.sqrt(120.0 * math.log(2.0))


@dataclass(frozen=True)
class SimConfig:
    n_particles: int
    dt: float = 1e-3
    seed: int = 0
    n_replicas: int = 1
    coeffs: ModelCoefficients = field(default_factory=ModelCoefficients)
    laws: InitialLaws = field(default_factory=InitialLaws)
    interaction: str = "exact"
    output_interval: float | None = None

    def __post_init__(self):
        if self.n_particles < 1 or self.n_replicas < 1:
            raise ConfigError("n_particles and n_replicas must be positive")
        if not (0 < self.dt <= self.coeffs.horizon):
            raise ConfigError("dt must lie in (0, horizon]")
        if self.dt * self.coeffs.drift_bound >= 1.0:
            raise ConfigError("dt * drift bound must stay below 1 for spike detection")
        if self.interaction not in INTERACTION_MODES:
            raise ConfigError(f"interaction must be one of {INTERACTION_MODES}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.output_interval is not None and self.output_interval <= 0:
            raise ConfigError("output_interval must be positive")


@dataclass
class ParticleSystemState:
    positions: np.ndarray
    voltages: np.ndarray
    time: float = 0.0
    spike_particles: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    spike_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    stream_ids: np.ndarray | None = None
    step: int = 0

    def __post_init__(self):
        if self.stream_ids is None:
            self.stream_ids = np.arange(len(self.voltages), dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.voltages)

    @property
    def canonical(self) -> np.ndarray:
        return mod2(self.voltages)

    @property
    def spike_log(self) -> list[tuple[int, float]]:
        return list(zip(self.spike_particles.tolist(), self.spike_times.tolist()))


def init_system(cfg: SimConfig, replica: int = 0, streams: ParticleStreams | None = None) -> ParticleSystemState:
    """Draw i.i.d. positions from nu and voltages from rho0 off the particle streams."""
    if streams is None:
        streams = ParticleStreams(cfg.seed, replica, np.arange(cfg.n_particles))
    u = streams.uniforms(N_INIT_UNIFORMS)
    positions = cfg.laws.nu.sample(u[:, :N_POSITION_UNIFORMS], ids=streams.ids)
    volts = cfg.laws.rho0.sample(u[:, N_POSITION_UNIFORMS])
    lo, hi = np.array(cfg.laws.nu.domain_lo), np.array(cfg.laws.nu.domain_hi)
    if np.any(positions < lo) or np.any(positions > hi):
        raise ConfigError("position law produced points outside the domain")
    return ParticleSystemState(positions=positions, voltages=volts, stream_ids=streams.ids.copy())


def _block_ids(coeffs, positions):
    th = coeffs.theta
    if getattr(th, "kind", None) == "block":
        return th.atom_index(positions)
    return None


def interaction_field(positions, vc, coeffs, mode="exact", atom_ids=None) -> np.ndarray:
    """``(1/N) sum_j theta(x_i, x_j) firing(v_j)`` for charging particles, 0 elsewhere.

    Both modes round the inner sum exactly once (``math.fsum`` / rational
    arithmetic), so for constant and block kernels they agree bit for bit.
    """
    n = len(vc)
    out = np.zeros(n)
    fire = np.flatnonzero(coeffs.firing(vc) > 0)
    charge = np.flatnonzero(coeffs.charging(vc) > 0)
    if len(fire) == 0 or len(charge) == 0:
        return out
    th = coeffs.theta
    kind = getattr(th, "kind", None)
    if getattr(th, "sup_norm", None) == 0:
        return out
    if kind == "constant":
        # fsum of equal terms is the correctly rounded product, so both modes share this
        out[charge] = float(Fraction(th.theta0) * len(fire))
    elif mode == "binned" and kind == "block":
        if atom_ids is None:
            atom_ids = th.atom_index(positions)
        mat = th.matrix_array
        counts = np.bincount(atom_ids[fire], minlength=len(mat))
        nz = np.flatnonzero(counts)
        vals = np.array([
            float(sum((Fraction(float(mat[a, b])) * int(counts[b]) for b in nz), Fraction(0)))
            for a in range(len(mat))
        ])
        out[charge] = vals[atom_ids[charge]]
    elif mode == "binned" and kind == "gaussian":
        cutoff = _GAUSS_CUTOFF * th.length
        pairs = cKDTree(positions[charge]).sparse_distance_matrix(
            cKDTree(positions[fire]), cutoff, output_type="ndarray"
        )
        pairs = pairs[np.lexsort((pairs["j"], pairs["i"]))]
        w = th.theta0 * np.exp(-(pairs["v"] ** 2) / (2.0 * th.length**2))
        sums = np.bincount(pairs["i"], weights=w, minlength=len(charge))
        out[charge] = sums
    else:
        xf = positions[fire]
        for start in range(0, len(charge), 256):
            rows = charge[start:start + 256]
            block = th(positions[rows], xf)
            out[rows] = [math.fsum(r) for r in block]
    return out / n


def particle_drift(positions, vc, coeffs, mode="exact", atom_ids=None) -> np.ndarray:
    inter = interaction_field(positions, vc, coeffs, mode, atom_ids)
    return coeffs.lam(vc) + coeffs.charging(vc) * inter


def euler_step(state: ParticleSystemState, cfg: SimConfig, noise, dt: float | None = None,
               atom_ids=None) -> ParticleSystemState:
    """One Euler-Maruyama step with coefficients frozen at the step start.

    ``noise`` holds one standard normal per particle.
    """
    dt = cfg.dt if dt is None else dt
    coeffs = cfg.coeffs
    vc = state.canonical
    drift = particle_drift(state.positions, vc, coeffs, cfg.interaction, atom_ids)
    if not np.all(np.abs(drift) <= coeffs.drift_bound + 1e-12):
        raise ContractError("drift exceeds its a priori bound")
    new_v = state.voltages + drift * dt + coeffs.sigma(vc) * math.sqrt(dt) * np.asarray(noise)
    # end point measured from the canonical start, so a downward wrap through 0 is not a spike
    end = vc + (new_v - state.voltages)
    hit = (vc < 1.0) & (end >= 1.0) & (end < 2.0)
    sp, st = state.spike_particles, state.spike_times
    if np.any(hit):
        idx = np.flatnonzero(hit)
        frac = (1.0 - vc[idx]) / (end[idx] - vc[idx])
        sp = np.concatenate([sp, idx])
        st = np.concatenate([st, state.time + dt * frac])
    return ParticleSystemState(
        positions=state.positions,
        voltages=new_v,
        time=(state.step + 1) * dt,
        spike_particles=sp,
        spike_times=st,
        stream_ids=state.stream_ids,
        step=state.step + 1,
    )


@dataclass
class Trajectory:
    """Snapshots of one replica, plus the dense path when recorded."""

    times: np.ndarray
    voltages: np.ndarray  # (n_out, N) unwrapped
    positions: np.ndarray
    spike_particles: np.ndarray
    spike_times: np.ndarray
    dt: float
    replica: int = 0
    dense_canonical: np.ndarray | None = None  # (n_steps + 1, N)
    dense_increments: np.ndarray | None = None  # (n_steps, N) Brownian increments

    @property
    def canonical(self) -> np.ndarray:
        return mod2(self.voltages)

    @property
    def dense_times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.dense_canonical))

    def snapshot(self, k: int) -> ParticleSystemState:
        return ParticleSystemState(positions=self.positions, voltages=self.voltages[k], time=float(self.times[k]))


def _n_steps(t_end: float, dt: float) -> int:
    n = round(t_end / dt)
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ConfigError(f"time {t_end} is not a multiple of dt={dt}")
    return n


def output_steps(cfg: SimConfig, t_end: float, output_times=None) -> np.ndarray:
    if output_times is None:
        interval = cfg.output_interval or t_end or cfg.dt
        k = _n_steps(interval, cfg.dt) if t_end > 0 else 1
        steps = np.arange(0, _n_steps(t_end, cfg.dt) + 1, max(k, 1))
        if t_end > 0 and steps[-1] != _n_steps(t_end, cfg.dt):
            steps = np.append(steps, _n_steps(t_end, cfg.dt))
        return steps
    steps = np.array(sorted({_n_steps(float(t), cfg.dt) for t in output_times}), dtype=np.int64)
    if len(steps) and steps[-1] > _n_steps(t_end, cfg.dt):
        raise ConfigError("output time beyond the horizon")
    return steps


def simulate(cfg: SimConfig, replica: int = 0, t_end: float | None = None, output_times=None,
             record: bool = False, chunk: int = 256, initial: ParticleSystemState | None = None,
             observe=None) -> Trajectory:
    """Run one replica to ``t_end`` (default: the model horizon).

    ``observe(state, dw)``, if given, is called before every step with the
    state at the step start and the Brownian increments about to be applied.
    """
    t_end = cfg.coeffs.horizon if t_end is None else float(t_end)
    n_steps = _n_steps(t_end, cfg.dt)
    steps_out = output_steps(cfg, t_end, output_times)
    if initial is None:
        streams = ParticleStreams(cfg.seed, replica, np.arange(cfg.n_particles))
        state = init_system(cfg, replica, streams)
    else:
        state = initial
        streams = ParticleStreams(cfg.seed, replica, state.stream_ids)
        streams.uniforms(N_INIT_UNIFORMS)
    atom_ids = _block_ids(cfg.coeffs, state.positions)
    sqdt = math.sqrt(cfg.dt)

    snaps = []
    dense_v = dense_dw = None
    if record:
        dense_v = np.empty((n_steps + 1, state.n))
        dense_dw = np.empty((n_steps, state.n))
        dense_v[0] = state.canonical
    out_iter = iter(steps_out.tolist())
    next_out = next(out_iter, None)
    z = None
    for s in range(n_steps + 1):
        while next_out is not None and next_out == s:
            snaps.append(state.voltages.copy())
            next_out = next(out_iter, None)
        if s == n_steps:
            break
        if s % chunk == 0:
            z = streams.normals(min(chunk, n_steps - s))
        zs = z[s % chunk]
        if observe is not None:
            observe(state, sqdt * zs)
        state = euler_step(state, cfg, zs, atom_ids=atom_ids)
        if record:
            dense_v[s + 1] = state.canonical
            dense_dw[s] = sqdt * zs
    return Trajectory(
        times=steps_out * cfg.dt,
        voltages=np.array(snaps),
        positions=state.positions,
        spike_particles=state.spike_particles,
        spike_times=state.spike_times,
        dt=cfg.dt,
        replica=replica,
        dense_canonical=dense_v,
        dense_increments=dense_dw,
    )


def euler_refinement_error(cfg: SimConfig, dt_levels, replica: int = 0, t_end: float | None = None) -> np.ndarray:
    """Sup-norm path differences between consecutive dt levels on one Brownian path.

    Levels must be dyadic: each dt equals the previous one divided by a power
    of two (a factor of one is allowed). Coarse increments are sums of the
    finest-level increments.
    """
    levels = [float(d) for d in dt_levels]
    if len(levels) < 2:
        raise ConfigError("need at least two dt levels")
    for a, b in zip(levels, levels[1:]):
        r = a / b
        if r < 1 - 1e-12 or abs(2.0 ** round(math.log2(r)) - r) > 1e-9 * r:
            raise ConfigError("dt levels must be dyadic refinements")
    t_end = cfg.coeffs.horizon if t_end is None else float(t_end)
    fine = levels[-1]
    n_fine = _n_steps(t_end, fine)
    streams = ParticleStreams(cfg.seed, replica, np.arange(cfg.n_particles))
    state0 = init_system(replace(cfg, dt=max(levels)), replica, streams)
    z_fine = streams.normals(n_fine) if n_fine else np.zeros((0, cfg.n_particles))
    atom_ids = _block_ids(cfg.coeffs, state0.positions)

    paths = []
    for dt in levels:
        r = round(dt / fine)
        n = n_fine // r
        z = z_fine[: n * r].reshape(n, r, -1).sum(axis=1) / math.sqrt(r)
        level_cfg = replace(cfg, dt=dt)
        st = state0
        vals = [st.voltages]
        for s in range(n):
            st = euler_step(st, level_cfg, z[s], dt=dt, atom_ids=atom_ids)
            vals.append(st.voltages)
        paths.append((r, np.array(vals)))
    errs = []
    for (ra, pa), (rb, pb) in zip(paths, paths[1:]):
        stride = ra // rb
        errs.append(float(np.max(np.abs(pa - pb[::stride]))) if len(pa) else 0.0)
    return np.array(errs)


def fit_strong_order(dt_levels, mean_errors) -> float:
    """Least-squares slope of log(error) against log(dt) of the coarser level of each pair."""
    dts = np.asarray(dt_levels[:-1], dtype=float)
    err = np.asarray(mean_errors, dtype=float)
    return float(np.polyfit(np.log(dts), np.log(err), 1)[0])
