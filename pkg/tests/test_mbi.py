import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from alphacir import analytics as A
from alphacir.cir import SimConfig, simulate_paths
from alphacir.errors import ParameterError
from alphacir.mbi import functional, simulate_measure_path
from alphacir.model import ModelParams
from alphacir.rng import RngStream
from alphacir.stats import compare, empirical_laplace


def test_functional():
    eta = np.array([[1.0, 2.0], [0.5, 0.0]])
    assert functional(eta, [1.0, 1.0]).tolist() == [3.0, 0.5]
    assert functional([0.0, 0.0], [2.0, 3.0]) == 0.0
    with pytest.raises(ParameterError):
        functional(eta, [1.0])


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=5))
def test_functional_one_is_total_mass(xs):
    assert functional(xs, np.ones(len(xs))) == pytest.approx(sum(xs))


def test_one_type_is_cir_engine():
    p = ModelParams(0.5, 1.0, 1.0, 1.0)
    cfg = SimConfig(T=0.3, n_paths=700)
    m = simulate_measure_path(p, cfg, [1.0], RngStream(1))
    c = simulate_paths(p, cfg, 1.0, RngStream(1).child(0))
    assert np.array_equal(m.states[:, :, 0], c.states)


def test_multitype_laplace():
    p = ModelParams(0.4, [1.0, 2.0, 0.5], [1.0, 0.5, 2.0], [0.5, 1.0, 0.0])
    cfg = SimConfig(h=2e-3, delta_B=2e-3, delta_I=2e-3, T=1.0, n_paths=20000)
    eta0 = np.array([1.0, 0.2, 2.0])
    rec = simulate_measure_path(p, cfg, eta0, RngStream(2), record_times=[0.5, 1.0])
    assert rec.states.shape == (3, 20000, 3)
    for t in (0.5, 1.0):
        f = np.array([1.0, 2.0, 0.5])
        want = math.exp(-A.log_laplace_closed(p, eta0, f, t))
        c = compare(empirical_laplace(rec.at(t), f), want, 3.0, 0.03 * cfg.bias_scale(p.alpha))
        assert c.passed, str(c)


def test_bad_start():
    p = ModelParams(0.5, 1.0, 1.0, [1.0, 1.0])
    with pytest.raises(ParameterError):
        simulate_measure_path(p, SimConfig(T=0.1, n_paths=3), [1.0], RngStream(0))
    with pytest.raises(ParameterError):
        simulate_measure_path(p, SimConfig(T=0.1, n_paths=3), [1.0, -1.0], RngStream(0))
