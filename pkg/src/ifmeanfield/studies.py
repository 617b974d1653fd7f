"""Study orchestration: runs simulations and solves, writes CSV tables and SVG figures.

Replica cells run on a thread pool; results are collected in submission
order so every table is independent of the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .config import ExperimentConfig
from .errors import ConfigError
from .fokker_planck import (ConditionalGridDensity, DiffusionSemigroup, discretize_initial, fp_solve,
                            mild_residual, total_firing_mass, weak_residual_phi)
from .mckean_vlasov import mkv_simulate
from .measures import (MartingaleAccumulator, WeightedAtomMeasure, l2_energy, mollified_density,
                       time_regularity)
from .measures import POINTS_PER_ALPHA
from .particles import euler_refinement_error, fit_strong_order, simulate
from .report import Raster, Series, emit_svg, time_tag, write_csv
from .testfunctions import TestFunction
from .torus import mod2, mollifier_scale_for
from .wasserstein import wasserstein1_joint, wasserstein1_v


@dataclass
class StudyResult:
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def pool_map(fn, items, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _grid_times(t_end: float, step: float, extra=()) -> list[float]:
    n = int(round(t_end / step))
    ts = {round(i * step, 12) for i in range(n + 1)} | {float(t) for t in extra} | {0.0, float(t_end)}
    return sorted(t for t in ts if t <= t_end + 1e-12)


def solve_reference(cfg: ExperimentConfig, t_end: float | None = None, extra_times=()) -> list[ConditionalGridDensity]:
    """Fokker-Planck path on the config's (M, K) grid, stored every ``pde.output_interval``."""
    t_end = cfg.model.horizon if t_end is None else float(t_end)
    init = discretize_initial(cfg.laws, cfg.pde.atoms, cfg.pde.cells, seed=cfg.seed)
    times = _grid_times(t_end, cfg.pde.output_interval, extra_times)
    return fp_solve(init, t_end, cfg.model, times, dt_max=cfg.pde.dt_max)


def _at(path, t: float):
    for mu in path:
        if abs(mu.time - t) < 1e-9:
            return mu
    raise ConfigError(f"time {t} not on the stored path")


def mollifier_scale(n: int, exponent: float) -> float:
    if abs(exponent - 1.0 / 3.0) < 1e-15:
        return mollifier_scale_for(n)
    return min(float(n) ** -exponent, 1.0)


def density_cells(alpha: float, minimum: int) -> int:
    return max(minimum, int(math.ceil(POINTS_PER_ALPHA / alpha)))


def _atoms(traj, k: int) -> WeightedAtomMeasure:
    return WeightedAtomMeasure.uniform(traj.positions, mod2(traj.voltages[k]))


# ---------------------------------------------------------------- trajectories

def run_trajectories(cfg: ExperimentConfig, out, threads: int = 1) -> StudyResult:
    out = Path(out)
    sim = cfg.sim_config()
    times = sorted({0.0, *cfg.study.times})
    trajs = pool_map(lambda r: simulate(sim, r, t_end=max(times), output_times=times),
                     range(cfg.sim.n_replicas), threads)
    res = StudyResult()
    res.files.append(write_csv(out / "spikes.csv", "spikes", _spike_rows(trajs)))
    tr0 = trajs[0]
    n = sim.n_particles
    alpha = mollifier_scale(n, cfg.study.alpha_exponent)
    k = density_cells(alpha, cfg.study.energy_cells)
    for j, t in enumerate(tr0.times):
        if t == 0.0 and 0.0 not in cfg.study.times:
            continue
        vc = mod2(tr0.voltages[j])
        res.files.append(write_csv(out / f"snapshot_t{time_tag(t)}.csv", "snapshot",
                                   [(i, *tr0.positions[i], vc[i]) for i in range(n)]))
        dens = mollified_density(_atoms(tr0, j), k, alpha)
        res.files.append(write_csv(out / f"density_t{time_tag(t)}_N{n}.csv", "density",
                                   zip(dens.grid, dens.values)))
    res.summary["n_spikes"] = int(sum(len(t.spike_times) for t in trajs))
    if cfg.plot:
        raster = Raster({i: tr0.spike_times[tr0.spike_particles == i] for i in range(n)})
        if res.summary["n_spikes"] and len(tr0.spike_times):
            res.files.append(_svg(out / "raster.svg", raster, title="spike raster", xlabel="t"))
    return res


def _spike_rows(trajs):
    rows = []
    for tr in trajs:
        order = np.lexsort((tr.spike_particles, tr.spike_times))
        rows += [(tr.replica, int(tr.spike_particles[i]), tr.spike_times[i]) for i in order]
    return rows


def _svg(path, data, **kw) -> Path:
    emit_svg(data, path=path, **kw)
    return Path(path)


# ---------------------------------------------------------------- pde

def run_pde(cfg: ExperimentConfig, out, threads: int = 1) -> StudyResult:
    out = Path(out)
    path = solve_reference(cfg, extra_times=cfg.study.times)
    res = StudyResult()
    for t in cfg.study.times:
        mu = _at(path, t)
        rows = []
        for m in range(mu.rho.shape[0]):
            x = mu.positions[m]
            rows += [(m, *x, mu.weights[m], k, mu.centers[k], mu.rho[m, k]) for k in range(mu.k)]
        res.files.append(write_csv(out / f"fp_t{time_tag(t)}.csv", "fp", rows))
    rate = [(mu.time, total_firing_mass(mu, cfg.model)) for mu in path]
    res.files.append(write_csv(out / "firing_rate.csv", "firing_rate", rate))
    res.summary["max_mass_error"] = max(float(np.max(np.abs(mu.row_masses() - 1.0))) for mu in path)
    if cfg.plot:
        t, f = np.array(rate).T
        res.files.append(_svg(out / "firing_rate.svg", [Series("firing mass", t, f)],
                              xlabel="t", ylabel="total firing mass"))
    return res


# ---------------------------------------------------------------- convergence

def _coarse_atoms(mu: ConditionalGridDensity, cells: int) -> WeightedAtomMeasure:
    """Lump the reference measure into ``cells`` voltage bins per position atom."""
    if mu.k % cells:
        raise ConfigError("joint_cells must divide the pde cell count")
    r = mu.k // cells
    mass = mu.h * mu.rho.reshape(mu.rho.shape[0], cells, r).sum(axis=2) * mu.weights[:, None]
    vc = (np.arange(cells) + 0.5) * (2.0 / cells)
    m_idx, c_idx = np.nonzero(mass > 0)
    w = mass[m_idx, c_idx]
    return WeightedAtomMeasure(mu.positions[m_idx], vc[c_idx], w / w.sum())


def run_convergence_study(cfg: ExperimentConfig, out, threads: int = 1) -> StudyResult:
    """Replica-mean W1 between the particle system and the Fokker-Planck reference."""
    out = Path(out)
    st = cfg.study
    times = sorted(float(t) for t in st.times)
    path = solve_reference(cfg, t_end=max(times), extra_times=times)
    refs = {t: _at(path, t) for t in times}
    coarse = {t: _coarse_atoms(refs[t], st.joint_cells) for t in times}

    def cell(args):
        n, r = args
        tr = simulate(cfg.sim_config(n), r, t_end=max(times), output_times=times)
        row = []
        for j, t in enumerate(times):
            emp = _atoms(tr, j)
            w1v = wasserstein1_v(emp, refs[t])
            joint = wasserstein1_joint(emp, coarse[t]) if n <= st.joint_max_atoms else math.nan
            row.append((w1v, joint))
        return row

    cells = [(int(n), r) for n in st.n_values for r in range(st.n_replicas)]
    results = dict(zip(cells, pool_map(cell, cells, threads)))
    rows, stats = [], []
    table = {}
    for n in st.n_values:
        n = int(n)
        for j, t in enumerate(times):
            w1 = np.array([results[(n, r)][j][0] for r in range(st.n_replicas)])
            joint = np.array([results[(n, r)][j][1] for r in range(st.n_replicas)])
            se = float(np.std(w1, ddof=1) / math.sqrt(len(w1))) if len(w1) > 1 else math.nan
            rows.append((n, t, float(np.mean(w1)), float(np.mean(joint))))
            stats.append((n, t, float(np.mean(w1)), se, st.n_replicas))
            table[(n, t)] = w1
    res = StudyResult(summary={"w1_v": table})
    res.files.append(write_csv(out / "w1_convergence.csv", "w1_convergence", rows))
    res.files.append(write_csv(out / "w1_convergence_stats.csv", "w1_convergence_stats", stats))
    if cfg.plot:
        series = [Series(f"t={time_tag(t)}", np.array([r[0] for r in rows if r[1] == t], float),
                         np.array([r[2] for r in rows if r[1] == t])) for t in times]
        res.files.append(_svg(out / "w1_convergence.svg", series, loglog=True, xlabel="N",
                              ylabel="mean W1 of voltage marginals"))
    return res


# ---------------------------------------------------------------- energy

def energy_cell(cfg: ExperimentConfig, n: int, replica: int) -> dict:
    """Energy functionals of the mollified empirical density for one (N, replica)."""
    st = cfg.study
    t_end = cfg.model.horizon
    alpha = mollifier_scale(n, st.alpha_exponent)
    k = density_cells(alpha, st.energy_cells)
    times = _grid_times(t_end, st.energy_interval)
    acc = MartingaleAccumulator(st.martingale_phi.build(), cfg.model)
    tr = simulate(cfg.sim_config(n), replica, t_end=t_end, output_times=times, observe=acc)
    dens = [mollified_density(_atoms(tr, j), k, alpha) for j in range(len(times))]
    energies = np.array([l2_energy(d) for d in dens])
    return {
        "alpha": alpha,
        "sup_l2": float(np.max(energies[:, 0])),
        "grad_l2": float(trapezoid(energies[:, 1], times)),
        "time_reg": time_regularity(dens, times, st.time_regularity_alpha),
        "sup_m_sq": acc.sup ** 2,
    }


def run_energy_study(cfg: ExperimentConfig, out, threads: int = 1) -> StudyResult:
    out = Path(out)
    st = cfg.study
    cells = [(int(n), r) for n in st.n_values for r in range(st.n_replicas)]
    results = dict(zip(cells, pool_map(lambda c: energy_cell(cfg, *c), cells, threads)))
    rows = []
    for n in st.n_values:
        n = int(n)
        cs = [results[(n, r)] for r in range(st.n_replicas)]
        rows.append((n, cs[0]["alpha"], *(float(np.mean([c[key] for c in cs]))
                                          for key in ("sup_l2", "grad_l2", "time_reg", "sup_m_sq")),
                     st.n_replicas))
    res = StudyResult(summary={"rows": rows})
    res.files.append(write_csv(out / "energy.csv", "energy", rows))
    if cfg.plot:
        ns = np.array([r[0] for r in rows], float)
        res.files.append(_svg(out / "energy.svg", [Series("sup_t int u^2", ns, np.array([r[2] for r in rows])),
                                                   Series("E sup |M|^2", ns, np.array([r[5] for r in rows]))],
                              loglog=True, xlabel="N"))
    return res


# ---------------------------------------------------------------- spikes

def cascade_stats(tr, n: int, window: float, split: float) -> tuple:
    """First spike time, fraction of other neurons spiking within ``window`` after it,
    first spike time in each cluster (``x1 < split`` versus the rest) and their delay."""
    if len(tr.spike_times) == 0:
        return (math.nan, 0.0, math.nan, math.nan, math.nan)
    i0 = int(np.argmin(tr.spike_times))
    t0 = float(tr.spike_times[i0])
    first = int(tr.spike_particles[i0])
    sel = (tr.spike_times > t0) & (tr.spike_times <= t0 + window) & (tr.spike_particles != first)
    frac = len(np.unique(tr.spike_particles[sel])) / (n - 1) if n > 1 else 0.0
    cluster = tr.positions[tr.spike_particles, 0] < split
    ta = float(np.min(tr.spike_times[cluster])) if np.any(cluster) else math.nan
    tb = float(np.min(tr.spike_times[~cluster])) if np.any(~cluster) else math.nan
    return (t0, frac, ta, tb, tb - ta)


def run_spike_study(cfg: ExperimentConfig, out, threads: int = 1) -> StudyResult:
    out = Path(out)
    st = cfg.study
    sim = cfg.sim_config()
    trajs = pool_map(lambda r: simulate(sim, r), range(st.n_replicas), threads)
    stats = [cascade_stats(tr, sim.n_particles, st.cascade_window, st.cluster_split) for tr in trajs]
    res = StudyResult(summary={"cascade": [s[1] for s in stats], "delay": [s[4] for s in stats]})
    res.files.append(write_csv(out / "spikes.csv", "spikes", _spike_rows(trajs)))
    res.files.append(write_csv(out / "cascade.csv", "cascade",
                               [(r, *s) for r, s in enumerate(stats)]))
    if cfg.plot and len(trajs[0].spike_times):
        tr0 = trajs[0]
        raster = Raster({i: tr0.spike_times[tr0.spike_particles == i] for i in range(sim.n_particles)})
        res.files.append(_svg(out / "raster.svg", raster, title="spike raster (replica 0)", xlabel="t"))
    return res


# ---------------------------------------------------------------- mild / weak residuals

def run_mild_check(cfg: ExperimentConfig, out, threads: int = 1) -> StudyResult:
    out = Path(out)
    times = sorted(float(t) for t in cfg.study.times)
    path = solve_reference(cfg, t_end=max(times), extra_times=times)
    sg = DiffusionSemigroup(cfg.model, cfg.pde.cells)
    all_t = np.array([mu.time for mu in path])
    phis = TestFunction.fourier_modes(cfg.study.fourier_kmax)

    def cell(phi):
        rows = []
        for t in times:
            upto = int(np.searchsorted(all_t, t + 1e-12))
            weak = weak_residual_phi(path[:upto], all_t[:upto], path[0], phi, cfg.model)
            rows.append((phi.label(), t, mild_residual(path, phi, t, cfg.model, sg), weak))
        return rows

    rows = [r for block in pool_map(cell, phis, threads) for r in block]
    res = StudyResult(summary={"max_mild": max(r[2] for r in rows), "max_weak": max(r[3] for r in rows)})
    res.files.append(write_csv(out / "mild_check.csv", "mild_check", rows))
    if cfg.plot:
        series = [Series(p.label(), np.array(times), np.array([r[2] for r in rows if r[0] == p.label()]))
                  for p in phis]
        res.files.append(_svg(out / "mild_check.svg", series, xlabel="t", ylabel="mild residual"))
    return res


# ---------------------------------------------------------------- McKean-Vlasov

def run_mkv_check(cfg: ExperimentConfig, out, threads: int = 1) -> StudyResult:
    out = Path(out)
    times = sorted(float(t) for t in cfg.study.times)
    path = solve_reference(cfg, t_end=max(times), extra_times=times)
    n = cfg.study.mkv_samples
    samples = mkv_simulate(path, cfg.model, n, cfg.seed, times, dt=cfg.sim.dt, rho0=cfg.laws.rho0)
    rows, check = [], []
    for j, t in enumerate(samples.times):
        vc = samples.canonical[j]
        rows += [(i, *samples.positions[i], vc[i], t) for i in range(n)]
        check.append((t, n, wasserstein1_v((vc, np.full(n, 1.0 / n)), _at(path, t))))
    res = StudyResult(summary={"w1_v": {c[0]: c[2] for c in check}})
    res.files.append(write_csv(out / "mkv_samples.csv", "mkv_samples", rows))
    res.files.append(write_csv(out / "mkv_check.csv", "mkv_check", check))
    if cfg.plot:
        mu = _at(path, times[-1])
        hist, edges = np.histogram(samples.canonical[-1], bins=mu.k // 8, range=(0.0, 2.0), density=True)
        res.files.append(_svg(out / "mkv_check.svg",
                              [Series("Fokker-Planck", mu.centers, mu.v_density()),
                               Series("McKean-Vlasov samples", 0.5 * (edges[1:] + edges[:-1]), hist)],
                              xlabel="v", ylabel="density"))
    return res


# ---------------------------------------------------------------- Euler order

def run_euler_order(cfg: ExperimentConfig, out, threads: int = 1) -> StudyResult:
    out = Path(out)
    st = cfg.study
    levels = [float(d) for d in st.dt_levels]
    sim = cfg.sim_config()
    errs = np.array(pool_map(lambda r: euler_refinement_error(sim, levels, r), range(st.n_replicas), threads))
    mean = errs.mean(axis=0)
    se = errs.std(axis=0, ddof=1) / math.sqrt(len(errs)) if len(errs) > 1 else np.full(len(mean), math.nan)
    order = fit_strong_order(levels, mean)
    rows = [(levels[i], levels[i + 1], mean[i], se[i], st.n_replicas) for i in range(len(mean))]
    res = StudyResult(summary={"order": order, "mean_errors": mean})
    res.files.append(write_csv(out / "euler_order.csv", "euler_order", rows))
    res.files.append(write_csv(out / "euler_order_fit.csv", "euler_order_fit", [(order,)]))
    if cfg.plot:
        res.files.append(_svg(out / "euler_order.svg", [Series("mean sup difference", np.array(levels[:-1]), mean)],
                              loglog=True, xlabel="dt", ylabel="error"))
    return res


STUDIES = {
    "trajectories": run_trajectories,
    "pde": run_pde,
    "convergence": run_convergence_study,
    "energy": run_energy_study,
    "spikes": run_spike_study,
    "mild_check": run_mild_check,
    "mkv_check": run_mkv_check,
    "euler_order": run_euler_order,
}


def run_study(cfg: ExperimentConfig, out=None, threads: int = 1, kind: str | None = None) -> StudyResult:
    kind = kind or cfg.study.kind
    return STUDIES[kind](cfg, out if out is not None else cfg.output_dir, threads)
