import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alphacir import kernels as KV
from alphacir.analytics import psi
from alphacir.errors import ParameterError
from alphacir.model import ExpFunctional, ModelParams

alphas = st.floats(0.05, 0.95)
pts = st.floats(1e-3, 50.0)
ALPHAS = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


@settings(max_examples=200)
@given(alphas, pts, pts)
def test_two_forms_of_K_agree(al, s, t):
    a = KV.kernel_K(al, s, t)
    b = KV.kernel_K_explicit(al, s, t)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-300)
    assert KV.kernel_K(al, s, t) == KV.kernel_K(al, t, s)


def test_K_on_axes_and_alpha_one():
    assert KV.kernel_K(0.5, 1e-300, 2.0) == pytest.approx(0.0, abs=1e-100)
    s, t = np.meshgrid([0.1, 1.0, 7.0], [0.2, 3.0], indexing="ij")
    assert KV.kernel_K(1.0, s, t) == pytest.approx(KV.kernel_K_alpha_one(s, t), rel=1e-12)
    assert KV.kernel_Ktilde(1.0, s, t) == pytest.approx(KV.kernel_Ktilde_alpha_one(s, t), rel=1e-12)
    with pytest.raises(ParameterError):
        KV.kernel_K(0.5, 0.0, 1.0)


def test_K_continuous_at_alpha_one():
    s, t = np.meshgrid(np.geomspace(0.01, 20, 9), np.geomspace(0.01, 20, 9), indexing="ij")
    ref = KV.kernel_K_alpha_one(s, t)
    gaps = [np.max(np.abs(KV.kernel_K(a, s, t) - ref)) for a in (0.9, 0.99, 0.999)]
    assert gaps[0] > gaps[1] > gaps[2]
    ref = KV.kernel_Ktilde_alpha_one(s, t)
    gaps = [np.max(np.abs(KV.kernel_Ktilde(a, s, t) - ref)) for a in (0.9, 0.99, 0.999)]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("al", [0.1, 0.5, 0.9])
def test_Ktilde_matches_exact_derivative(al):
    # mpmath.diff differentiates the explicit form at high precision
    for s, t in [(1e-3, 2e-3), (0.01, 5.0), (0.3, 0.3), (2.0, 40.0)]:
        with mpmath.workdps(40):
            d = mpmath.diff(lambda x, y: KV._kernel_K_mp(mpmath.mpf(al), x, y),
                            (mpmath.mpf(s), mpmath.mpf(t)), (1, 1))
        assert KV.kernel_Ktilde(al, s, t) == pytest.approx(float(d), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(alphas, st.floats(0.1, 50.0), st.floats(0.1, 50.0))
def test_Ktilde_matches_finite_difference(al, s, t):
    fd = KV.finite_difference_Ktilde(al, s, t)
    assert KV.kernel_Ktilde(al, s, t) == pytest.approx(fd, rel=1e-5)


@settings(max_examples=200)
@given(alphas, pts, pts)
def test_remainder_identity(al, s, t):
    r = KV.remainder_kernel(al, s, t)
    assert r == pytest.approx(KV.remainder_kernel_decomposed(al, s, t), rel=1e-9)
    t1, t2, _ = KV.remainder_terms(al, s, t)
    assert t1 >= 0 and t2 >= 0


def test_remainder_near_origin_matches_high_precision():
    # near the corner the remainder grows like (s+t)^(alpha-2); check the
    # closed form against a 50-digit derivative there
    al = mpmath.mpf("0.5")
    for x in (1e-4, 1e-8):
        with mpmath.workdps(50):
            xm = mpmath.mpf(x)
            d = mpmath.diff(lambda s, t: KV._kernel_K_mp(al, s, t), (xm, xm), (1, 1))
            u = 2 * xm
            j = -(al * (al - 1) * u ** (al - 2) / (1 + u**al) - al**2 * u ** (2 * al - 2) / (1 + u**al) ** 2)
            want = float(2 * d - j)
        assert KV.remainder_kernel(0.5, x, x) == pytest.approx(want, rel=1e-9)
    vals = [KV.remainder_kernel(0.5, x, x) for x in (1e-2, 1e-4, 1e-6)]
    assert vals[0] < vals[1] < vals[2]


def test_rank_one_kernel_is_psd(gen):
    sig = lambda x: np.exp(-x) * np.sqrt(x)
    k = lambda a, s, t: sig(s) * sig(t)
    assert KV.gram_psd_test(k, 0.5, (KV.GridSpec(), gen)) >= -1e-12


@pytest.mark.parametrize("al", ALPHAS)
def test_gram_remainder_psd(al):
    g = np.random.default_rng(int(al * 100))
    spec = KV.GridSpec(32, 1e-3, 50.0)
    for _ in range(20):
        assert KV.gram_psd_test(KV.remainder_kernel, al, (spec, g)) >= -1e-8


def test_reverse_inequality_fails_somewhere(gen):
    rev = lambda a, s, t: -np.asarray(KV.remainder_kernel(a, s, t))
    worst = min(KV.gram_psd_test(rev, al, (KV.GridSpec(), gen)) for al in ALPHAS)
    assert worst < 0


def test_grid_spec():
    with pytest.raises(ParameterError):
        KV.GridSpec(0)
    with pytest.raises(ParameterError):
        KV.GridSpec(8, 2.0, 1.0)
    r = KV.GridSpec(5, 1.0, 16.0).regular()
    assert r == pytest.approx([1, 2, 4, 8, 16])
    with pytest.raises(ParameterError):
        KV.gram_matrix(KV.kernel_K, 0.5, np.ones(65))


def test_UV_examples():
    assert KV.check_UV_inequality(0.5, ExpFunctional([], np.zeros((0, 1)))) == (0.0, 0.0)
    U, V = KV.check_UV_inequality(0.5, ExpFunctional.single([1.0]))
    assert U == pytest.approx(2 * math.log(2) - math.log(1 + math.sqrt(2)), rel=1e-14)
    assert V == pytest.approx(KV.kernel_K(0.5, 1.0, 1.0), rel=1e-14)


def test_UV_random_panel(gen):
    for _ in range(1000):
        F = KV.random_exp_functional(gen, 1)
        al = float(gen.uniform(0.05, 0.95))
        U, V = KV.check_UV_inequality(al, F)
        assert 2 * V - U >= -1e-10 * max(1.0, abs(U))


def test_poincare_examples(gen):
    p = ModelParams(0.5, 1.0, 1.0, 2.0)
    assert KV.check_poincare(p, ExpFunctional([1.0, -1.0], [[0.5], [0.5]])) == pytest.approx((0, 0), abs=1e-15)
    for _ in range(1000):
        pr = KV.random_params(gen)
        F = KV.random_exp_functional(gen, pr.n_types)
        var, bound = KV.check_poincare(pr, F)
        assert var <= bound + 1e-10


def test_J_is_minus_psi_second_derivative():
    assert KV.kernel_J(0.3, 0.5, 1.5) == pytest.approx(-psi(0.3, 2.0, 2))
