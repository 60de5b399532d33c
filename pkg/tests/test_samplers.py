import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from alphacir import analytics as A
from alphacir.errors import ParameterError
from alphacir.model import ModelParams
from alphacir.rng import RngStream
from alphacir.samplers import (StableSpec, blocked, linnik_samples, pareto_from_uniform,
                               sample_linnik_measure, sample_pareto_jump,
                               sample_positive_stable, sample_stable_random_measure)
from alphacir.stats import McEstimate, compare, empirical_laplace

N = 10**6


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_positive_stable_laplace(alpha, lam, gen):
    s = sample_positive_stable(gen, alpha, N)
    assert np.all(s > 0) and np.all(np.isfinite(s))
    c = compare(McEstimate.from_samples(np.exp(-lam * s)), math.exp(-lam**alpha))
    assert c.passed, str(c)


def test_positive_stable_spec_examples(gen):
    s = sample_positive_stable(gen, 0.5, N)
    assert compare(McEstimate.from_samples(np.exp(-s)), math.exp(-1)).passed
    assert compare(McEstimate.from_samples(np.exp(-2 * s)), math.exp(-math.sqrt(2))).passed


def test_stable_spec_scale(gen):
    sp = StableSpec(0.4, 2.5)
    s = sp.sample(gen, N)
    assert compare(McEstimate.from_samples(np.exp(-s)), float(sp.laplace(1.0))).passed
    with pytest.raises(ParameterError):
        StableSpec(1.2)


def test_stable_fractional_moment(gen):
    # E S^p = Gamma(1 - p/alpha) / Gamma(1 - p) for p < alpha
    al, p = 0.6, -0.6
    s = sample_positive_stable(gen, al, N)
    want = gamma(1 - p / al) / gamma(1 - p)
    assert compare(McEstimate.from_samples(s**p), want).passed


def test_pareto(gen):
    assert pareto_from_uniform(1.0, 0.5, 0.3) == 0.3
    y = sample_pareto_jump(gen, 1.5, 0.2, N)
    assert y.min() >= 0.2
    est = McEstimate.from_samples((y > 0.4).astype(float))
    assert compare(est, 2.0**-1.5).passed
    with pytest.raises(ParameterError):
        pareto_from_uniform(0.5, -1.0, 1.0)


@given(st.floats(0.1, 3.0), st.floats(1e-3, 10.0), st.floats(1e-6, 1.0))
def test_pareto_inverse_cdf(expo, cut, u):
    y = pareto_from_uniform(u, expo, cut)
    assert y >= cut
    assert (y / cut) ** (-expo) == pytest.approx(u, rel=1e-9)


def test_linnik_one_type(unit2, gen):
    eta = sample_linnik_measure(gen, unit2, N)
    assert eta.shape == (N, 1)
    assert compare(empirical_laplace(eta, [1.0]), 0.25).passed
    mom = McEstimate.from_samples(eta[:, 0] ** 0.25)
    assert compare(mom, A.moment_eta_total(0.5, 2.0, 0.25)).passed
    assert A.moment_eta_total(0.5, 2.0, 0.25) == pytest.approx(1.9228, abs=1e-4)


def test_linnik_general_and_small_shape(gen):
    p = ModelParams(0.3, [2.0, 1.0, 0.5], [1.0, 3.0, 0.7], [0.05, 1.5, 0.0])
    eta = sample_linnik_measure(gen, p, N)
    assert np.all(eta[:, 2] == 0)
    for f in ([1.0, 1.0, 1.0], [0.2, 4.0, 1.0], [3.0, 0.1, 2.0]):
        c = compare(empirical_laplace(eta, f), math.exp(-A.stationary_log_laplace(p, f)))
        assert c.passed, str(c)


def test_linnik_types_independent(gen):
    p = ModelParams(0.5, 1.0, 1.0, [1.0, 2.0])
    eta = sample_linnik_measure(gen, p, N)
    e = np.exp(-eta)
    prod = McEstimate.from_samples((e[:, 0] - e[:, 0].mean()) * (e[:, 1] - e[:, 1].mean()))
    assert compare(prod, 0.0).passed


def test_stable_random_measure(gen):
    assert np.all(sample_stable_random_measure(gen, 0.5, [0.0, 0.0], 10) == 0)
    x = sample_stable_random_measure(gen, 0.5, [1.0], N)
    assert compare(empirical_laplace(x, [1.0]), math.exp(-1)).passed
    x = sample_stable_random_measure(gen, 0.5, [2.0], N)
    assert compare(empirical_laplace(x, [1.0]), math.exp(-2)).passed
    x = sample_stable_random_measure(gen, 0.7, [0.5, 1.5], N)
    want = math.exp(-(0.5 * 2.0**0.7 + 1.5 * 0.5**0.7))
    assert compare(empirical_laplace(x, [2.0, 0.5]), want).passed


def test_blocked_is_thread_invariant(unit2):
    st_ = RngStream(3, 8)
    a = linnik_samples(st_, unit2, 200001, threads=1)
    b = linnik_samples(st_, unit2, 200001, threads=4)
    assert a.shape == (200001, 1)
    assert np.array_equal(a, b)
    c = linnik_samples(RngStream(4, 8), unit2, 1000)
    assert not np.array_equal(a[:1000], c)
    assert blocked(st_, 0, lambda g, k: g.random(k)).shape == (0,)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(1, 50))
def test_stable_positive_finite(al, n):
    s = sample_positive_stable(np.random.default_rng(n), al, 1000)
    assert np.all(s > 0) and np.all(np.isfinite(s))
