"""Monte Carlo estimates with standard errors, decay fits and the gap test."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st

from . import _kernels as K
from .analytics import gap_exact, stationary_log_laplace, variance_semigroup_psi1
from .cir import SimConfig, run_blocks, step_constants
from .errors import ParameterError
from .model import CirParams, as_model
from .rng import as_stream


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n: int

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ParameterError("std_error must be >= 0")
        if self.n < 2:
            raise ParameterError("an estimate needs n >= 2")

    @classmethod
    def from_samples(cls, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size < 2:
            raise ParameterError("an estimate needs n >= 2")
        return cls(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))

    @classmethod
    def variance_of(cls, x):
        """Sample variance with its large-sample standard error."""
        x = np.asarray(x, dtype=float).ravel()
        n = x.size
        if n < 4:
            raise ParameterError("a variance estimate needs n >= 4")
        d = x - x.mean()
        v = float(d @ d / (n - 1))
        m4 = float(np.mean(d**4))
        se = math.sqrt(max(m4 - v * v, 0.0) / n)
        return cls(v, se, n)

    def minus(self, other):
        return McEstimate(self.value - other.value, math.hypot(self.std_error, other.std_error),
                          min(self.n, other.n))

    def __repr__(self):
        return f"{self.value:.6g} +/- {self.std_error:.2g} (n={self.n})"


@dataclass(frozen=True)
class Comparison:
    """Outcome of |estimate - target| <= k SE + bias budget."""

    estimate: McEstimate
    target: float
    k: float
    bias_budget: float

    @property
    def error(self):
        return self.estimate.value - self.target

    @property
    def tolerance(self):
        return self.k * self.estimate.std_error + self.bias_budget

    @property
    def passed(self):
        return bool(abs(self.error) <= self.tolerance)

    def __str__(self):
        flag = "ok" if self.passed else "FAIL"
        return (f"{flag}: {self.estimate.value:.6g} vs {self.target:.6g} "
                f"(|err|={abs(self.error):.3g}, tol={self.k}*{self.estimate.std_error:.3g}"
                f"+{self.bias_budget:.3g})")


def compare(estimate: McEstimate, target: float, k: float = 3.0, bias_budget: float = 0.0):
    if k < 0 or bias_budget < 0:
        raise ParameterError("k and bias_budget must be >= 0")
    return Comparison(estimate, float(target), float(k), float(bias_budget))


def compare_two(a: McEstimate, b: McEstimate, k: float = 3.0, bias_budget: float = 0.0):
    """Two independent estimates: |a - b| <= k * combined SE + budget."""
    return compare(a.minus(b), 0.0, k, bias_budget)


def empirical_laplace(samples, f):
    """Mean and SE of exp(-<eta, f>) over an (n, R) or (n,) sample array."""
    x = np.asarray(samples, dtype=float)
    f = np.asarray(f, dtype=float)
    if x.ndim == 1:
        val = np.exp(-x * float(f.ravel()[0]) if f.size == 1 else -x @ f)
    else:
        if x.shape[-1] != f.size:
            raise ParameterError("dimension mismatch between samples and f")
        val = np.exp(-(x @ f))
    return McEstimate.from_samples(val)


@dataclass(frozen=True)
class LaplaceBias:
    """Simulated minus closed-form Laplace functional at one (t, lambda)."""
    t: float
    lam: float
    bias: McEstimate
    scale: float


def laplace_bias(params, sim: SimConfig, eta0, times, lambdas, rng=None, threads=None):
    """Signed weak errors of exp(-lambda * eta_t(E)) on a (t, lambda) grid."""
    from .analytics import log_laplace_closed
    from .mbi import simulate_measure_path
    p = as_model(params)
    eta0 = np.asarray(eta0, dtype=float)
    rec = simulate_measure_path(p, sim, eta0, rng, record_times=times, threads=threads)
    out = []
    for t in times:
        x = rec.at(t)
        for lam in lambdas:
            f = np.full(p.n_types, float(lam))
            est = empirical_laplace(x, f)
            exact = math.exp(-float(log_laplace_closed(p, eta0, f, t)))
            out.append(LaplaceBias(float(t), float(lam),
                                   McEstimate(est.value - exact, est.std_error, est.n),
                                   sim.bias_scale(p.alpha)))
    return out


def fit_bias_constant(ladder, k=3.0):
    """Smallest C with |bias| <= k SE + C * scale at every ladder point.

    ``ladder`` is an iterable of :class:`LaplaceBias`; the result is a
    one-sided envelope, so larger samples only ever tighten it.
    """
    c = 0.0
    for pt in ladder:
        excess = abs(pt.bias.value) - k * pt.bias.std_error
        c = max(c, excess / pt.scale)
    return c


def halving_check(coarse, fine, k=3.0):
    """Per point: |bias_fine| <= |bias_coarse| / 2 + k * combined SE.

    Returns a list of (t, lambda, passed, coarse bias, fine bias, combined SE).
    """
    out = []
    for c, f in zip(coarse, fine):
        if (c.t, c.lam) != (f.t, f.lam):
            raise ParameterError("coarse and fine grids differ")
        se = math.hypot(c.bias.std_error, f.bias.std_error)
        ok = abs(f.bias.value) <= 0.5 * abs(c.bias.value) + k * se
        out.append((c.t, c.lam, ok, c.bias.value, f.bias.value, se))
    return out


def nested_variance(w, inner):
    """Variance of conditional means from nested samples, with jackknife SE.

    ``inner`` is (n_outer, k) draws given each outer point and ``w`` the
    outer importance weights.  The estimator is the weighted outer variance
    of the inner means minus the mean inner variance over k, which is
    unbiased for any k >= 2.
    """
    w = np.asarray(w, dtype=float)
    inner = np.asarray(inner, dtype=float)
    n, k = inner.shape
    mi = inner.mean(axis=1)
    vi = inner.var(axis=1, ddof=1) if k > 1 else np.zeros(n)
    a = w * (mi * mi - vi / k)
    b = w * mi
    W, A, Bs = w.sum(), a.sum(), b.sum()
    full = A / W - (Bs / W) ** 2
    jk = (A - a) / (W - w) - ((Bs - b) / (W - w)) ** 2
    se = math.sqrt((n - 1) / n * np.sum((jk - jk.mean()) ** 2))
    return full, se, jk


@dataclass(frozen=True)
class DecayFit:
    slope: float
    half_width: float
    intercept: float

    def __iter__(self):
        return iter((self.slope, self.half_width))


def fit_decay_rate(times, log_values, weights=None, level=0.95):
    """Weighted least-squares slope of log-variance against time.

    The half-width is the ``level`` t-interval from the weighted residuals,
    so exact exponential input gives a zero half-width.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(log_values, dtype=float)
    if t.size < 4 or t.size != y.size:
        raise ParameterError("fit_decay_rate needs >= 4 matching points")
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(y)):
        raise ParameterError("weights must be >= 0 and log-values finite")
    W = w.sum()
    tb = w @ t / W
    yb = w @ y / W
    sxx = w @ (t - tb) ** 2
    if not sxx > 1e-14 * max(1.0, W * tb * tb):
        raise ParameterError("degenerate design: times do not vary")
    slope = float(w @ ((t - tb) * (y - yb)) / sxx)
    icpt = float(yb - slope * tb)
    res = y - icpt - slope * t
    s2 = (w @ res**2) / (t.size - 2) / (W / t.size)
    se = math.sqrt(s2 / (sxx / (W / t.size)))
    hw = float(_st.t.ppf(0.5 + level / 2, t.size - 2) * se)
    return DecayFit(slope, hw, icpt)


@dataclass(frozen=True)
class GapTestConfig:
    """Budget of the Monte Carlo gap leg.

    Times are in units of 1/b: the fit uses t in [t_lo/b, t_hi/b].
    """

    t_lo: float = 5.0
    t_hi: float = 15.0
    n_times: int = 11
    n_outer: int = 4096
    n_immigration: int = 4096
    sim: SimConfig = field(default_factory=lambda: SimConfig(h=1e-3, delta_B=1e-3, delta_I=1e-3))
    p_base: float = 0.3
    closed_tol: float = 0.05
    mc_tol: float = 0.15
    k_se: float = 3.0
    seed: int = 0


@dataclass
class GapReport:
    b: float
    gap_exact: float
    closed_slope: float
    closed_half_width: float
    mc_slope: float
    mc_se: float
    times: np.ndarray
    closed_variance: np.ndarray
    mc_variance: np.ndarray
    mc_variance_se: np.ndarray
    checks: dict

    @property
    def passed(self):
        return all(self.checks.values())

    def lines(self):
        yield f"gap_exact = {self.gap_exact:.17g} (expected b/2 = {self.b / 2:.17g})"
        yield f"closed-form slope = {self.closed_slope:.6f} +/- {self.closed_half_width:.2g}"
        yield f"Monte Carlo slope = {self.mc_slope:.6f} +/- {self.mc_se:.2g} (1 SE)"
        for k, v in self.checks.items():
            yield f"{'PASS' if v else 'FAIL'} {k}"


def _log_mixture(g, n, base_draw, base_pdf, lo, hi, p_base):
    """Defensive mixture of a base law and a log-uniform law on [lo, hi].

    Returns the draws and the likelihood ratio base_pdf / mixture_pdf.
    """
    L = math.log(hi / lo)
    pick = g.random(n) < p_base
    x_base = base_draw(n)
    x_log = lo * np.exp(L * g.random(n))
    x = np.where(pick, x_base, x_log)
    pb = base_pdf(x)
    q = p_base * pb + (1 - p_base) * np.where((x >= lo) & (x <= hi), 1.0 / (x * L), 0.0)
    return x, pb / q


def stationary_tail_sample(params, n, rng, s_max=1e16, p_base=0.3):
    """Linnik draws eta with importance weights that over-sample large eta.

    Uses eta = (a/b)^(1/alpha) G^(1/alpha) S with Kanter's
    S = A(U) (sin((1-alpha)U) / W)^((1-alpha)/alpha).  S is large when the
    exponential W is small or when U is close to pi; both are drawn from
    defensive mixtures with a log-uniform component reaching ``s_max``.
    """
    cp = params
    g = rng
    al = cp.alpha
    gam = g.gamma(cp.m / cp.a, 1.0, n)
    v_min = min(s_max ** (-al), 0.1)
    v, lr_v = _log_mixture(g, n, lambda k: np.pi * (g.random(k) + 2.0**-54),
                           lambda x: np.where(x < np.pi, 1.0 / np.pi, 0.0), v_min, np.pi, p_base)
    u = np.pi - v
    lr = lr_v
    if al < 1.0:
        w_min = min(s_max ** (-al / (1 - al)), 0.1)
        w, lr_w = _log_mixture(g, n, g.standard_exponential, lambda x: np.exp(-x),
                               w_min, 1.0, p_base)
        lr = lr * lr_w
    num = np.sin(al * u) / np.sin(u) ** (1.0 / al)
    s = num * (np.sin((1.0 - al) * u) / w) ** ((1.0 - al) / al)
    return (cp.a / cp.b) ** (1 / al) * gam ** (1 / al) * s, lr


def _cb_at(z0, params, sim, rec_steps, gen):
    c = step_constants(params, sim)
    out = np.empty((rec_steps.size, z0.size))
    K.cir_paths(np.ascontiguousarray(z0, dtype=float), gen, c, rec_steps, out,
                np.zeros(4, dtype=np.int64))
    return out


def gap_monte_carlo(params, cfg: GapTestConfig, rng=None, threads=None):
    """Nested Monte Carlo estimate of var_Q(T(t) Psi_1) on the fit grid.

    By the branching property T(t)Psi_1(eta) = c_t h_t(eta), where c_t is the
    Laplace transform at 1 of the immigration-only process started from 0
    and h_t(eta) that of the immigration-free process started from eta.
    So var = c_t^2 var_Q(1 - h_t), estimated with two inner immigration-free
    paths per outer stationary draw (Y1 Y2 is unbiased for (1 - h)^2).
    """
    cp = params
    stream = as_stream(rng, cfg.seed)
    b = cp.b
    times = np.linspace(cfg.t_lo / b, cfg.t_hi / b, cfg.n_times)
    sim = cfg.sim
    rec = np.asarray([0] + [sim.steps(float(np.round(t / sim.h) * sim.h)) for t in times],
                     dtype=np.int64)
    times = rec[1:] * sim.h
    p0 = CirParams(cp.alpha, cp.a, cp.b, 0.0)
    pi = CirParams(cp.alpha, cp.a, cp.b, cp.m)
    bs = 256

    n = cfg.n_outer
    s_max = math.exp(1.5 * b * times[-1] / cp.alpha)
    eta, lr = stationary_tail_sample(cp, n, stream.child(0).fresh(), s_max, cfg.p_base)
    y = np.empty((times.size, n, 2))

    def outer_block(i):
        lo, hi = i * bs, min(n, (i + 1) * bs)
        gen = stream.child(1).child(i).fresh()
        for j in range(2):
            x = _cb_at(eta[lo:hi], p0, sim, rec, gen)
            y[:, lo:hi, j] = -np.expm1(-x[1:])

    run_blocks(outer_block, -(-n // bs), threads)
    nc = cfg.n_immigration
    ci = np.empty((times.size, nc))

    def imm_block(i):
        lo, hi = i * bs, min(nc, (i + 1) * bs)
        x = _cb_at(np.zeros(hi - lo), pi, sim, rec, stream.child(2).child(i).fresh())
        ci[:, lo:hi] = np.exp(-x[1:])

    run_blocks(imm_block, -(-nc // bs), threads)

    V = np.empty(times.size)
    Vjk = np.empty((times.size, n))
    for j in range(times.size):
        V[j], _, Vjk[j] = nested_variance(lr, y[j])
    c = ci.mean(axis=1)
    cjk = (ci.sum(axis=1)[:, None] - ci) / (nc - 1)
    return times, V, Vjk, c, cjk


def _jk_se(reps):
    n = reps.shape[-1]
    return np.sqrt((n - 1) / n * np.sum((reps - reps.mean(axis=-1, keepdims=True)) ** 2, axis=-1))


def gap_acceptance_test(params_const, cfg: GapTestConfig | None = None, rng=None,
                        threads=None) -> GapReport:
    """Three-way check of the spectral gap b/2 for constant coefficients."""
    cp = params_const if isinstance(params_const, CirParams) else as_model(params_const).type_params(0)
    cfg = cfg or GapTestConfig()
    if cp.b <= 0:
        raise ParameterError("the gap test needs b > 0")
    model = cp.to_model()
    g = gap_exact(model)
    times, V, Vjk, c, cjk = gap_monte_carlo(cp, cfg, rng, threads)

    cv = variance_semigroup_psi1(model, times)
    closed = fit_decay_rate(times, np.log(cv))

    mc_var = c**2 * V
    if np.any(mc_var <= 0):
        mc_slope, mc_se = math.nan, math.inf
        se_var = np.full(times.size, math.inf)
    else:
        se_V = _jk_se(Vjk)
        se_c = _jk_se(cjk)
        rel = np.hypot(se_V / V, 2 * se_c / c)
        se_var = rel * mc_var
        wts = 1.0 / rel**2
        mc_slope = fit_decay_rate(times, np.log(mc_var), wts).slope
        jk_o = [fit_decay_rate(times, np.log(c**2 * Vjk[:, i]), wts).slope
                if np.all(Vjk[:, i] > 0) else mc_slope for i in range(Vjk.shape[1])]
        jk_c = [fit_decay_rate(times, np.log(cjk[:, i] ** 2 * V), wts).slope
                for i in range(cjk.shape[1])]
        mc_se = float(math.hypot(_jk_se(np.asarray(jk_o)), _jk_se(np.asarray(jk_c))))
    b = cp.b
    checks = {
        "gap_exact equals b/2": g == 0.5 * b,
        f"closed-form slope within {cfg.closed_tol:.0%} of -b":
            abs(closed.slope + b) <= cfg.closed_tol * b,
        f"Monte Carlo slope within {cfg.mc_tol:.0%} of -b":
            bool(abs(mc_slope + b) <= cfg.mc_tol * b),
        f"Monte Carlo and closed-form slopes agree within {cfg.k_se:g} SE":
            bool(abs(mc_slope - closed.slope) <= cfg.k_se * mc_se),
    }
    return GapReport(b, g, closed.slope, closed.half_width, float(mc_slope), float(mc_se),
                     times, cv, mc_var, se_var, checks)
