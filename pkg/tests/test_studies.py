import math
from types import SimpleNamespace

import numpy as np
import pytest

from ifmeanfield.config import parse_config, preset
from ifmeanfield.fokker_planck import ConditionalGridDensity
from ifmeanfield.report import read_csv
from ifmeanfield.studies import (_coarse_atoms, _grid_times, cascade_stats, density_cells, mollifier_scale,
                                 pool_map, run_spike_study, solve_reference)
from ifmeanfield.torus import mollifier_scale_for


def fake_traj(particles, times, x1):
    return SimpleNamespace(spike_particles=np.array(particles), spike_times=np.array(times, float),
                           positions=np.column_stack([x1, np.full(len(x1), 0.5), np.full(len(x1), 0.5)]))


def test_cascade_stats_hand_example():
    # neuron 2 fires first at 0.5; neurons 0 and 3 follow inside the window, 1 fires too late
    tr = fake_traj([2, 0, 3, 0, 1], [0.5, 0.6, 0.75, 0.7, 0.9], [0.2, 0.8, 0.3, 0.9])
    t0, frac, ta, tb, delay = cascade_stats(tr, 4, 0.3, 0.5)
    assert t0 == 0.5 and frac == pytest.approx(2 / 3)
    assert ta == 0.5 and tb == 0.75 and delay == pytest.approx(0.25)


def test_cascade_stats_without_spikes():
    t0, frac, *_ = cascade_stats(fake_traj([], [], [0.2, 0.8]), 2, 0.3, 0.5)
    assert math.isnan(t0) and frac == 0.0


def test_mollifier_scale_rules():
    assert mollifier_scale(1000, 1 / 3) == mollifier_scale_for(1000)
    assert mollifier_scale(100, 0.5) == pytest.approx(0.1)
    assert mollifier_scale(1, 0.5) == 1.0
    assert density_cells(0.1, 256) == 640 and density_cells(1.0, 256) == 256


def test_grid_times_include_extras():
    assert _grid_times(0.2, 0.1, [0.15]) == [0.0, 0.1, 0.15, 0.2]


def test_pool_map_keeps_order():
    assert pool_map(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]


def test_coarse_atoms_preserve_mass_and_marginal():
    rng = np.random.default_rng(0)
    rho = rng.random((3, 32))
    rho /= rho.sum(axis=1, keepdims=True) * (2 / 32)
    mu = ConditionalGridDensity(rng.random((3, 3)), np.array([0.2, 0.3, 0.5]), rho)
    c = _coarse_atoms(mu, 8)
    assert c.weights.sum() == pytest.approx(1.0, abs=1e-14)
    per_cell = np.bincount(np.floor(c.v / 0.25).astype(int), weights=c.weights, minlength=8)
    np.testing.assert_allclose(per_cell, (mu.v_density() * 2 / 32).reshape(8, 4).sum(axis=1), atol=1e-14)


def test_solve_reference_stores_requested_times():
    cfg = parse_config("model: {horizon: 0.1}\npde: {atoms: 2, cells: 50, output_interval: 0.05}\nstudy: {times: [0.1]}")
    path = solve_reference(cfg, extra_times=[0.07])
    assert [round(p.time, 12) for p in path] == [0.0, 0.05, 0.07, 0.1]


def test_fig2_preset_cascades(tmp_path):
    res = run_spike_study(preset("fig2"), tmp_path)
    assert sum(f >= 0.8 for f in res.summary["cascade"]) >= 8
    _, header, rows = read_csv(tmp_path / "cascade.csv")
    assert len(rows) == 10 and header[2] == "cascade_fraction"


def test_fig3_bridge_delay(tmp_path):
    res = run_spike_study(preset("fig3"), tmp_path)
    delays = np.array(res.summary["delay"])
    assert np.any(delays[np.isfinite(delays)] > 0)
