import math
from dataclasses import replace

import numpy as np
import pytest

from ifmeanfield.errors import ConfigError
from ifmeanfield.laws import InitialLaws, PositionLaw, VoltageDensity
from ifmeanfield.model import ModelCoefficients, ThetaKernel
from ifmeanfield.particles import (ParticleSystemState, SimConfig, euler_refinement_error, euler_step,
                                   fit_strong_order, init_system, interaction_field, simulate)
from ifmeanfield.streams import ParticleStreams


def make_cfg(n=20, theta=ThetaKernel.gaussian(2.0, 0.3), **kw):
    coeff_kw = {k: kw.pop(k) for k in list(kw) if k in ("lambda_hat", "epsilon", "delta", "horizon",
                                                         "drift_variant", "sigma_bump")}
    coeffs = ModelCoefficients(theta_kernel=theta, **coeff_kw)
    return SimConfig(n_particles=n, coeffs=coeffs, **kw)


def test_init_system_support_and_determinism():
    cfg = make_cfg(4)
    s = init_system(cfg, 0)
    assert s.voltages.shape == (4,) and np.all((s.voltages >= 0) & (s.voltages < 2))
    assert np.all((s.positions >= 0) & (s.positions <= 1))
    assert s.time == 0.0 and len(s.spike_log) == 0
    s2 = init_system(cfg, 0)
    np.testing.assert_array_equal(s.voltages, s2.voltages)
    np.testing.assert_array_equal(s.positions, s2.positions)
    assert not np.array_equal(s.voltages, init_system(cfg, 1).voltages)


def test_euler_step_hand_example():
    # no drift, sigma = 0.2, Z = 0.5, dt = 0.01 -> increment 0.2 * 0.1 * 0.5
    cfg = make_cfg(1, theta=ThetaKernel.constant(0.0), drift_variant="zero", epsilon=0.02, dt=0.01)
    s = ParticleSystemState(np.array([[0.5, 0.5, 0.5]]), np.array([0.3]))
    out = euler_step(s, cfg, np.array([0.5]))
    assert out.voltages[0] - 0.3 == pytest.approx(0.01, abs=1e-15)
    assert out.time == pytest.approx(0.01)


def test_interaction_vanishes_when_nobody_fires():
    cfg = make_cfg(2, theta=ThetaKernel.constant(2.0))
    x = np.full((2, 3), 0.5)
    np.testing.assert_array_equal(interaction_field(x, np.array([0.2, 0.9]), cfg.coeffs), [0.0, 0.0])
    # one firing neuron lifts the charging one by theta0 / N and not itself
    np.testing.assert_array_equal(interaction_field(x, np.array([0.2, 1.1]), cfg.coeffs), [1.0, 0.0])


def test_spike_detection_upward_crossing_only():
    cfg = make_cfg(3, theta=ThetaKernel.constant(0.0), drift_variant="zero", epsilon=0.02, dt=0.01)
    x = np.full((3, 3), 0.5)
    # sigma sqrt(dt) = 0.02: particle 0 crosses 1 upward, particle 1 wraps down through 0,
    # particle 2 goes from 1.98 across 2 = 0
    s = ParticleSystemState(x, np.array([0.99, 0.01, 1.98]))
    out = euler_step(s, cfg, np.array([1.0, -1.0, 2.0]))
    assert out.spike_log == [(0, pytest.approx(0.005))]
    assert out.canonical[1] == pytest.approx(1.99)


def test_positions_are_frozen_over_many_steps():
    cfg = make_cfg(3, dt=1e-5, horizon=1.0)
    tr = simulate(cfg, output_times=[0.0, 0.5, 1.0])
    assert len(tr.times) == 3
    init = init_system(cfg, 0)
    np.testing.assert_array_equal(tr.positions, init.positions)


def test_zero_horizon_returns_initial_state():
    cfg = make_cfg(5)
    tr = simulate(cfg, t_end=0.0)
    assert len(tr.times) == 1
    np.testing.assert_array_equal(tr.voltages[0], init_system(cfg, 0).voltages)


def test_decoupled_particle_does_not_depend_on_n():
    one = simulate(make_cfg(1, theta=ThetaKernel.constant(0.0)), output_times=[0.25, 0.5, 1.0])
    many = simulate(make_cfg(100, theta=ThetaKernel.constant(0.0)), output_times=[0.25, 0.5, 1.0])
    np.testing.assert_array_equal(one.voltages[:, 0], many.voltages[:, 0])


@pytest.mark.parametrize("theta", [
    ThetaKernel.constant(5.0),
    ThetaKernel.block([[0.25, 0.5, 0.5], [0.75, 0.5, 0.5]], [[5.0, 1.0], [3.0, 7.0]]),
])
def test_binned_mode_is_bitwise_equal_to_exact(theta):
    nu = PositionLaw("atoms", atoms=((0.25, 0.5, 0.5), (0.75, 0.5, 0.5)))
    laws = InitialLaws(nu=nu, rho0=VoltageDensity("uniform"))
    coeffs = ModelCoefficients(theta_kernel=theta, lambda_hat=0.1, horizon=2.0)
    cfg = SimConfig(60, coeffs=coeffs, laws=laws, dt=1e-3)
    a = simulate(cfg, output_times=[1.0, 2.0])
    b = simulate(replace(cfg, interaction="binned"), output_times=[1.0, 2.0])
    np.testing.assert_array_equal(a.voltages, b.voltages)
    np.testing.assert_array_equal(a.spike_times, b.spike_times)
    assert len(a.spike_times) > 0


def test_binned_gaussian_matches_exact_closely():
    cfg = make_cfg(200, theta=ThetaKernel.gaussian(4.0, 0.2))
    rng = np.random.default_rng(0)
    x, v = rng.random((200, 3)), rng.random(200) * 2
    ex = interaction_field(x, v, cfg.coeffs, "exact")
    bi = interaction_field(x, v, cfg.coeffs, "binned")
    np.testing.assert_allclose(bi, ex, rtol=1e-14, atol=1e-16)


def test_exchangeability_permutes_trajectories():
    cfg = make_cfg(30, theta=ThetaKernel.gaussian(5.0, 0.3))
    base = simulate(cfg, output_times=[1.0])
    perm = np.random.default_rng(5).permutation(30)
    start = init_system(cfg, 0, ParticleStreams(cfg.seed, 0, perm))
    shuffled = simulate(cfg, output_times=[1.0], initial=start)
    np.testing.assert_array_equal(shuffled.voltages[-1], base.voltages[-1][perm])


def test_simulate_output_grid_and_interval():
    cfg = make_cfg(3, output_interval=0.25)
    tr = simulate(cfg)
    np.testing.assert_allclose(tr.times, [0, 0.25, 0.5, 0.75, 1.0])
    with pytest.raises(ConfigError):
        simulate(cfg, output_times=[0.1234567])


def test_record_keeps_increments():
    tr = simulate(make_cfg(4), record=True, t_end=0.1)
    assert tr.dense_increments.shape == (100, 4)
    assert tr.dense_canonical.shape == (101, 4)


@pytest.mark.parametrize("kw", [dict(n_particles=0), dict(dt=2.0), dict(dt=0.1), dict(seed=-1),
                                dict(seed=2**64), dict(interaction="fast"), dict(output_interval=0.0)])
def test_sim_config_validation(kw):
    base = dict(n_particles=3, dt=1e-3)
    base.update(kw)
    with pytest.raises(ConfigError):
        SimConfig(coeffs=ModelCoefficients(theta_kernel=ThetaKernel.constant(20.0)), **base)


def test_refinement_identical_levels_give_zero():
    cfg = make_cfg(5)
    np.testing.assert_array_equal(euler_refinement_error(cfg, [1e-3, 1e-3]), [0.0])


def test_refinement_rejects_non_dyadic_levels():
    with pytest.raises(ConfigError):
        euler_refinement_error(make_cfg(5), [1e-3, 0.3e-3])
    with pytest.raises(ConfigError):
        euler_refinement_error(make_cfg(5), [1e-3])


def test_refinement_coarse_noise_is_sum_of_fine_noise():
    # with zero drift and constant sigma Euler is exact given the Brownian path,
    # so every level ends at the same point up to rounding
    cfg = make_cfg(4, theta=ThetaKernel.constant(0.0), drift_variant="zero")
    err = euler_refinement_error(cfg, [8e-3, 4e-3, 2e-3, 1e-3])
    assert np.all(err < 1e-12)


def test_fit_strong_order_recovers_slope():
    dts = [0.008, 0.004, 0.002, 0.001]
    errs = [3.0 * d ** 0.5 for d in dts[:-1]]
    assert fit_strong_order(dts, errs) == pytest.approx(0.5, abs=1e-12)
