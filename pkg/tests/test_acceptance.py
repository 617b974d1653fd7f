"""End-to-end acceptance checks, one test per criterion, each at its stated tolerance and time budget."""

import time
from dataclasses import replace

import numpy as np
import pytest

from ifmeanfield import cli
from ifmeanfield.config import parse_config, preset
from ifmeanfield.fokker_planck import ConditionalGridDensity, cell_centers, discretize_initial, fp_solve, weak_residual_phi
from ifmeanfield.measures import MartingaleAccumulator, WeightedAtomMeasure
from ifmeanfield.model import ModelCoefficients, ThetaKernel
from ifmeanfield.particles import simulate
from ifmeanfield.studies import (energy_cell, run_convergence_study, run_euler_order, run_mild_check, run_mkv_check,
                                 run_spike_study)
from ifmeanfield.testfunctions import TestFunction
from ifmeanfield.wasserstein import wasserstein1_joint, wasserstein1_v
from oracles import circle_w1_bruteforce, joint_w1_lp, mollifier_cell_averages, wrapped_heat_kernel

pytestmark = pytest.mark.acceptance

FULL = preset("full")


def with_model(cfg, **kw):
    return replace(cfg, model=replace(cfg.model, **kw))


def with_study(cfg, **kw):
    return replace(cfg, study=replace(cfg.study, **kw))


def constant_coupling(cfg, theta0=2.0):
    return with_model(cfg, theta_kernel=ThetaKernel.constant(theta0))


def test_01_mass_conservation(verdict):
    t0 = time.perf_counter()
    coeffs = with_model(FULL, theta_kernel=ThetaKernel.gaussian(2.0, 0.5), horizon=2.0).model
    init = discretize_initial(FULL.laws, 100, 200, seed=0)
    path = fp_solve(init, 2.0, coeffs, np.round(np.arange(0.0, 2.0 + 1e-9, 0.01), 10))
    err = max(float(np.max(np.abs(mu.row_masses() - 1.0))) for mu in path)
    dt = time.perf_counter() - t0
    ok = err <= 1e-10 and dt <= 30
    assert verdict(1, ok, f"max per-row mass error {err:.2e} over {len(path)} outputs", dt)


def test_02_heat_kernel(verdict):
    t0 = time.perf_counter()
    coeffs = ModelCoefficients(epsilon=0.05, drift_variant="zero", theta_kernel=ThetaKernel.constant(0.0), horizon=0.5)
    k, v0, alpha = 400, 1.0, 0.02
    init = ConditionalGridDensity(np.full((1, 3), 0.5), np.ones(1), mollifier_cell_averages(k, v0, alpha)[None, :])
    rho = fp_solve(init, 0.5, coeffs)[-1].rho[0]
    err = float(np.max(np.abs(rho - wrapped_heat_kernel(cell_centers(k), v0, 0.05, 0.5, jmax=10))))
    dt = time.perf_counter() - t0
    assert verdict(2, err <= 1e-3 and dt <= 10, f"sup error {err:.2e} vs wrapped Gaussian", dt)


def _replica_means(res, ns):
    return np.array([res.summary["w1_v"][(n, 1.0)].mean() for n in ns])


def test_03_particle_to_pde_convergence(verdict, tmp_path):
    t0 = time.perf_counter()
    ns = (100, 1000, 10000)
    free = with_study(constant_coupling(FULL, 0.0), n_values=ns, n_replicas=20, times=(1.0,))
    coupled = with_study(constant_coupling(FULL, 2.0), n_values=ns, n_replicas=20, times=(1.0,))
    m_free = _replica_means(run_convergence_study(free, tmp_path / "free"), ns)
    m_coupled = _replica_means(run_convergence_study(coupled, tmp_path / "coupled"), ns)
    ratio = m_free[0] / m_free[-1]
    dt = time.perf_counter() - t0
    ok = (np.all(np.diff(m_free) < 0) and ratio >= 5 and np.all(np.diff(m_coupled) < 0) and dt <= 300)
    detail = (f"free W1 {np.array2string(m_free, precision=4)} ratio {ratio:.2f}; "
              f"coupled W1 {np.array2string(m_coupled, precision=4)}")
    assert verdict(3, ok, detail, dt)


def test_04_martingale_decay(verdict):
    t0 = time.perf_counter()
    phi = TestFunction("cos", 1)
    means = {}
    for n in (100, 400):
        sups = []
        for r in range(50):
            acc = MartingaleAccumulator(phi, FULL.model)
            simulate(FULL.sim_config(n), r, observe=acc)
            sups.append(acc.sup ** 2)
        means[n] = float(np.mean(sups))
    ratio = means[100] / means[400]
    dt = time.perf_counter() - t0
    ok = 2.5 <= ratio <= 6 and dt <= 120
    assert verdict(4, ok, f"E sup|M|^2: N=100 {means[100]:.3e}, N=400 {means[400]:.3e}, ratio {ratio:.2f}", dt)


def test_05_energy_uniformity(verdict):
    t0 = time.perf_counter()
    cfg = constant_coupling(FULL, 2.0)
    sups = {n: float(np.mean([energy_cell(cfg, n, r)["sup_l2"] for r in range(5)])) for n in (100, 1000, 10000)}
    ratio = max(sups.values()) / min(sups.values())
    dt = time.perf_counter() - t0
    detail = ", ".join(f"N={n}: {v:.4f}" for n, v in sups.items()) + f"; max/min {ratio:.3f}"
    assert verdict(5, ratio <= 2 and dt <= 180, f"sup_t int u^2 {detail}", dt)


def test_06_mild_residual(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = with_study(FULL, times=(0.25, 0.5, 1.0), fourier_kmax=4)
    res = run_mild_check(cfg, tmp_path)
    worst = res.summary["max_mild"]
    dt = time.perf_counter() - t0
    assert verdict(6, worst <= 5e-3 and dt <= 60, f"max mild residual {worst:.2e} (K={cfg.pde.cells})", dt)


def test_07_weak_residual(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = with_study(FULL, times=(1.0,), fourier_kmax=4)
    pde = run_mild_check(cfg, tmp_path).summary["max_weak"]
    modes = TestFunction.fourier_modes(4)
    emp = {}
    for n in (100, 400):
        vals = []
        for r in range(10):
            tr = simulate(cfg.sim_config(n), r, record=True)
            path = [WeightedAtomMeasure.uniform(tr.positions, v) for v in tr.dense_canonical]
            vals.append(max(weak_residual_phi(path, tr.dense_times, path[0], p, cfg.model) for p in modes))
        emp[n] = float(np.mean(vals))
    dt = time.perf_counter() - t0
    ok = pde <= 1e-2 and emp[400] < emp[100] and dt <= 120
    detail = f"PDE {pde:.2e}; empirical N=100 {emp[100]:.3f}, N=400 {emp[400]:.3f}"
    assert verdict(7, ok, detail, dt)


def test_08_mckean_vlasov(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = with_study(FULL, times=(1.0,), mkv_samples=10_000)
    w1 = run_mkv_check(cfg, tmp_path).summary["w1_v"][1.0]
    dt = time.perf_counter() - t0
    assert verdict(8, w1 <= 0.05 and dt <= 60, f"W1 of 1e4 samples vs PDE at t=1: {w1:.4f}", dt)


def test_09_euler_order(verdict, tmp_path):
    t0 = time.perf_counter()
    cfg = with_study(preset("euler"), n_replicas=20, dt_levels=(0.008, 0.004, 0.002, 0.001))
    res = run_euler_order(cfg, tmp_path)
    order = res.summary["order"]
    dt = time.perf_counter() - t0
    errs = np.array2string(res.summary["mean_errors"], precision=4)
    assert verdict(9, order >= 0.4 and dt <= 60, f"fitted strong order {order:.3f}, errors {errs}", dt)


def test_10_ot_oracles(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)

    def measure(n):
        w = rng.random(n) + 0.05
        return WeightedAtomMeasure(rng.random((n, 3)), rng.random(n) * 2.0, w / w.sum())

    joint_err = circle_err = 0.0
    for _ in range(200):
        a, b = measure(rng.integers(1, 7)), measure(rng.integers(1, 7))
        ref = joint_w1_lp(a.positions, a.v, a.weights, b.positions, b.v, b.weights)
        joint_err = max(joint_err, abs(wasserstein1_joint(a, b) - ref))
        a, b = measure(rng.integers(1, 6)), measure(rng.integers(1, 6))
        circle_err = max(circle_err, abs(wasserstein1_v(a, b) - circle_w1_bruteforce(a.v, a.weights, b.v, b.weights)))
    dt = time.perf_counter() - t0
    ok = joint_err <= 1e-9 and circle_err <= 1e-12 and dt <= 30
    assert verdict(10, ok, f"joint vs LP {joint_err:.1e}, circle vs brute force {circle_err:.1e}", dt)


def test_11_cascade(verdict, tmp_path):
    t0 = time.perf_counter()
    strong = run_spike_study(preset("fig2"), tmp_path / "strong").summary["cascade"]
    zero = run_spike_study(preset("fig2_uncoupled"), tmp_path / "zero").summary["cascade"]
    hits = sum(f >= 0.8 for f in strong)
    dt = time.perf_counter() - t0
    ok = hits >= 8 and max(zero) < 0.3 and dt <= 60
    detail = f"coupled: {hits}/10 replicas with fraction >= 0.8; uncoupled max fraction {max(zero):.2f}"
    assert verdict(11, ok, detail, dt)


SMALL = """
model: {horizon: 0.3, sigma_bump: 0.1, theta_kernel: {kind: gaussian, theta0: 2.0, length: 0.5}}
sim: {n_particles: 30, n_replicas: 3, output_interval: 0.1}
pde: {atoms: 5, cells: 160, output_interval: 0.01}
study: {n_values: [30, 60], n_replicas: 4, times: [0.1, 0.3], mkv_samples: 500,
        dt_levels: [0.004, 0.002, 0.001], energy_interval: 0.05, fourier_kmax: 2}
seed: 17
"""


def test_12_determinism(verdict, tmp_path):
    t0 = time.perf_counter()
    small = tmp_path / "small.yaml"
    small.write_text(SMALL)
    runs = [(cmd, str(small)) for cmd in cli.SUBCOMMANDS] + [("spikes", "fig2"), ("spikes", "fig3")]
    mismatched = []
    for cmd, config in runs:
        outputs = []
        for i, threads in enumerate((1, 1, 4)):
            out = tmp_path / f"{cmd}-{config.replace('/', '_')[-12:]}-{i}"
            assert cli.main([cmd, "--config", config, "--out", str(out), "--threads", str(threads)]) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        if not (outputs[0] and outputs[0] == outputs[1] == outputs[2]):
            mismatched.append(f"{cmd}:{config}")
    dt = time.perf_counter() - t0
    detail = f"{len(runs)} studies x (1, 1, 4 threads): " + ("all byte-identical" if not mismatched else
                                                            f"mismatch in {mismatched}")
    assert verdict(12, not mismatched, detail, dt)
