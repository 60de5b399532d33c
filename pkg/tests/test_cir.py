import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alphacir import analytics as A
from alphacir.cir import (SimConfig, convolution_exponent, no_immigration_sampler,
                          sample_fixed_time_convolution, simulate_path, simulate_paths,
                          step_euler_thinning)
from alphacir.errors import ClampRateError, ParameterError, UnsupportedParameterError
from alphacir.model import CirParams, ModelParams
from alphacir.rng import RngStream
from alphacir.stats import compare, empirical_laplace

UNIT = CirParams(0.5, 1.0, 1.0, 1.0)


def test_config_validation():
    with pytest.raises(ParameterError):
        SimConfig(h=0)
    with pytest.raises(ParameterError):
        SimConfig(small_jumps="other")
    cfg = SimConfig(h=0.01, T=1.0)
    assert cfg.steps(0.5) == 50
    with pytest.raises(ParameterError):
        cfg.steps(0.505)
    half = cfg.halved()
    assert (half.h, half.delta_B, half.delta_I) == (0.005, 5e-4, 5e-4)
    assert cfg.bias_scale(0.5) == pytest.approx(0.01 + 2 * 1e-3**0.5)


def test_absorbing_zero(gen):
    p = CirParams(0.5, 1.0, 1.0, 0.0)
    cfg = SimConfig()
    for _ in range(100):
        assert step_euler_thinning(0.0, p, cfg, gen) == 0.0
    with pytest.raises(ParameterError):
        step_euler_thinning(-1.0, p, cfg, gen)


def test_zero_horizon():
    rec = simulate_path(UNIT, SimConfig(T=0.0), 1.7, RngStream(0))
    assert rec.times.tolist() == [0.0] and rec.states.tolist() == [1.7]


def test_deterministic_decay_without_noise():
    p = CirParams(0.5, 1e-12, 1.0, 0.0)
    rec = simulate_path(p, SimConfig(T=1.0), 2.0, RngStream(1))
    want = 2.0 * np.exp(-rec.times / 0.5)
    assert rec.states == pytest.approx(want, rel=3e-3)
    assert rec.branch_jumps == 0 and rec.immigration_jumps == 0


@pytest.mark.parametrize("mode", ["gaussian", "drop"])
def test_no_immigration_laplace(mode):
    # E exp(-lam Z_t) = exp(-z0 V_t(lam)) when m = 0
    p = CirParams(0.5, 1.0, 1.0, 0.0)
    cfg = SimConfig(h=2e-3, delta_B=2e-3, T=1.0, n_paths=100000, small_jumps=mode)
    rec = simulate_paths(p, cfg, 1.0, RngStream(2), record_times=[1.0])
    for lam in (0.5, 2.0):
        want = math.exp(-A.v_flow(ModelParams(0.5, 1.0, 1.0, 1.0), [lam], 1.0)[0])
        c = compare(empirical_laplace(rec.at(1.0), [lam]), want, 3.0, 0.03 * cfg.bias_scale(0.5))
        assert c.passed, str(c)


def test_stable_regime_matches_closed_form():
    # forcing the frozen-rate stable draw on every step keeps the law right
    cfg = SimConfig(h=2e-3, delta_B=2e-3, delta_I=2e-3, T=1.0, n_paths=100000,
                    max_jumps_per_step=1e-9)
    rec = simulate_paths(UNIT, cfg, 1.0, RngStream(3), record_times=[1.0])
    assert rec.stable_steps > 0
    want = math.exp(-A.log_laplace_closed(UNIT.to_model(), [1.0], [1.0], 1.0))
    c = compare(empirical_laplace(rec.at(1.0), [1.0]), want, 3.0, 0.03 * cfg.bias_scale(0.5))
    assert c.passed, str(c)


def test_long_run_stationary():
    p = CirParams(0.5, 2.0, 1.5, 1.0)
    cfg = SimConfig(h=1e-2, delta_B=1e-2, delta_I=1e-2, T=10.0, n_paths=20000)
    rec = simulate_paths(p, cfg, 0.0, RngStream(4), record_times=[10.0])
    want = (1 + 2.0 / 1.5) ** (-1.0 / 2.0)
    c = compare(empirical_laplace(rec.at(10.0), [1.0]), want, 3.0, 0.03 * cfg.bias_scale(0.5))
    assert c.passed, str(c)


def test_thread_and_seed_determinism():
    cfg = SimConfig(T=0.2, n_paths=3000, block_paths=512)
    a = simulate_paths(UNIT, cfg, 1.0, RngStream(5), threads=1)
    b = simulate_paths(UNIT, cfg, 1.0, RngStream(5), threads=3)
    c = simulate_paths(UNIT, cfg, 1.0, RngStream(6), threads=1)
    assert np.array_equal(a.states, b.states)
    assert a.branch_jumps == b.branch_jumps and a.clamps == b.clamps
    assert not np.array_equal(a.states, c.states)
    assert a.states.shape == (201, 3000)


def test_clamp_rate_error():
    cfg = SimConfig(h=0.3, delta_B=0.3, delta_I=0.3, T=3.0, n_paths=2000, max_clamp_rate=0.0)
    p = CirParams(0.5, 5.0, 1.0, 0.1)
    with pytest.raises(ClampRateError):
        simulate_paths(p, cfg, 0.5, RngStream(7))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.1, 3.0), st.floats(-1.0, 3.0), st.floats(0.0, 3.0),
       st.floats(0.0, 5.0))
def test_paths_nonnegative(al, a, b, m, z0):
    cfg = SimConfig(h=0.01, delta_B=0.01, delta_I=0.01, T=0.2, n_paths=50, max_clamp_rate=1.0)
    rec = simulate_paths(CirParams(al, a, b, m), cfg, z0, RngStream(8))
    assert np.all(rec.states >= 0) and np.all(np.isfinite(rec.states))


def test_convolution_trivial_cases():
    cfg = SimConfig()
    assert sample_fixed_time_convolution(UNIT, 1.3, 0.0, 1, RngStream(9), cfg) == 1.3
    with pytest.raises(ParameterError):
        sample_fixed_time_convolution(UNIT, 1.0, 1.0, 0, RngStream(9), cfg)


def test_convolution_exponent_converges():
    t, lam = 1.0, 1.5
    p = UNIT.to_model()
    exact = A.log_laplace_closed(p, [0.4], [lam], t)
    gaps = [abs(convolution_exponent(UNIT, 0.4, lam, t, N) - exact) for N in (4, 16, 64)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[1] / gaps[2] == pytest.approx(4.0, rel=0.1)


def test_convolution_sampler_law():
    cfg = SimConfig(h=1e-2, delta_B=1e-2, delta_I=1e-2)
    x = sample_fixed_time_convolution(UNIT, 0.5, 1.0, 4, RngStream(10), cfg, size=20000)
    want = math.exp(-convolution_exponent(UNIT, 0.5, 1.0, 1.0, 4))
    c = compare(empirical_laplace(x, [1.0]), want, 3.0, 0.03 * cfg.bias_scale(0.5))
    assert c.passed, str(c)


def test_sub_sampler_rejects_coarse_steps():
    with pytest.raises(UnsupportedParameterError):
        no_immigration_sampler(CirParams(0.5, 1.0, 3.0, 1.0), SimConfig(h=1.0, delta_B=1.0), refine=1)
