"""Generalized Fleming-Viot process on a finite type space.

Two independent simulation routes: direct Beta-jump events, and the
normalized measure-valued alpha-CIR process under the random time change
ds = Gamma(alpha+2) eta(E)^(-alpha) dt.  The stationary law is available as
an importance-weighted pushforward of the Linnik law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate, linalg, special

from . import _kernels as K
from .cir import SimConfig, run_blocks, step_constants
from .errors import (DegenerateStateError, ParameterError, QuadratureError)
from .model import ModelParams, check_alpha, prob_state
from .rng import as_stream
from .samplers import blocked, sample_linnik_measure
from .stats import nested_variance

ROUTES = ("direct", "time-change")
QUAD_EPSABS = 1e-10


@dataclass(frozen=True)
class GfvConfig:
    epsilon: float = 1e-3
    horizon: float = 1.0
    n_paths: int = 1000
    seed: int = 0
    route: str = "direct"
    table_size: int = 4096
    block_paths: int = 256

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ParameterError(f"epsilon={self.epsilon!r} must lie in (0,1)")
        if not self.horizon >= 0:
            raise ParameterError("horizon must be >= 0")
        if int(self.n_paths) < 1:
            raise ParameterError("n_paths must be >= 1")
        if self.route not in ROUTES:
            raise ParameterError(f"route must be one of {ROUTES}")
        if int(self.table_size) < 16:
            raise ParameterError("table_size must be >= 16")


def _res_density(alpha):
    """(core, w): density = core(u) (1-u)^w of the resampling jump measure."""
    B = special.beta(1 - alpha, 1 + alpha)
    return (lambda u: u ** (-2 - alpha) / B), alpha


def _imm_density(alpha, mE):
    c = mE / ((alpha + 1) * special.beta(1 - alpha, alpha))
    return (lambda u: c * u ** (-1 - alpha)), alpha - 1


def _quad(f, lo, hi, **kw):
    res = integrate.quad(f, lo, hi, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=500,
                         full_output=1, **kw)
    if len(res) > 3 or res[1] > max(QUAD_EPSABS, 1e-11 * abs(res[0])):
        raise QuadratureError(f"jump-rate quadrature failed on [{lo}, {hi}]")
    return res[0]


def gfv_jump_rates(alpha, mE, epsilon):
    """Total rates of resampling and immigration events with u >= epsilon."""
    alpha = check_alpha(alpha)
    if not 0 < epsilon < 1:
        raise ParameterError("epsilon must lie in (0,1)")
    if mE <= 0:
        raise ParameterError("mE must be > 0")
    B1 = special.beta(1 - alpha, 1 + alpha)
    B2 = special.beta(1 - alpha, alpha)
    mid = max(0.5, epsilon)
    res = imm = 0.0
    if epsilon < mid:
        res += _quad(lambda u: u ** (-2 - alpha) * (1 - u) ** alpha, epsilon, mid)
        imm += _quad(lambda u: u ** (-1 - alpha) * (1 - u) ** (alpha - 1), epsilon, mid)
    res += _quad(lambda u: u ** (-2 - alpha), mid, 1.0, weight="alg", wvar=(0.0, alpha))
    imm += _quad(lambda u: u ** (-1 - alpha), mid, 1.0, weight="alg", wvar=(0.0, alpha - 1))
    return res / B1, mE * imm / ((alpha + 1) * B2)


def gfv_jump_rates_mpmath(alpha, mE, epsilon, dps=30):
    """Independent evaluation of the same two rates as incomplete beta integrals."""
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        e = mpmath.mpf(epsilon)
        res = mpmath.betainc(-1 - a, 1 + a, e, 1) / mpmath.beta(1 - a, 1 + a)
        imm = mpmath.betainc(-a, a, e, 1) / mpmath.beta(1 - a, a)
        imm = mpmath.mpf(mE) * imm / (a + 1)
        return float(res), float(imm)


def small_immigration_drift(alpha, mE, epsilon):
    """mE * int_0^eps u nu_I(du): relaxation rate of mu toward m/m(E)."""
    return mE / (alpha + 1) * special.betainc(1 - alpha, alpha, epsilon)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _gl_cells(g, a, b):
    x = 0.5 * (b - a)[:, None] * _GL_X[None, :] + 0.5 * (a + b)[:, None]
    return 0.5 * (b - a) * (g(x) @ _GL_W)


def jump_table(density, epsilon, size=4096, tail=1e-12):
    """(u grid, cumulative mass) for inverse-CDF draws on [epsilon, 1].

    ``density`` is a pair (core, w) meaning core(u) (1-u)^w.  The grid is
    log-spaced toward epsilon and, in v = 1 - u, toward 1.  Cells are
    integrated by 8-point Gauss-Legendre, those above the midpoint in v so
    their widths are exact; the cell touching 1 by adaptive quadrature with
    the algebraic endpoint weight.
    """
    core, ew = density
    mid = max(0.5, epsilon)
    n_hi = max(size // 4, 8)
    n_lo = size - n_hi if epsilon < mid else 1
    lo = np.geomspace(epsilon, mid, n_lo)
    v = np.geomspace(1.0 - mid, tail, n_hi)
    cells_lo = _gl_cells(lambda x: core(x) * (1 - x) ** ew, lo[:-1], lo[1:])
    cells_hi = _gl_cells(lambda y: core(1 - y) * y**ew, v[1:], v[:-1])
    last = _quad(lambda y: core(1.0 - y), 0.0, tail, weight="alg", wvar=(ew, 0.0))
    u = np.concatenate([lo, 1.0 - v[1:], [1.0]])
    cdf = np.concatenate([[0.0], np.cumsum(np.concatenate([cells_lo, cells_hi, [last]]))])
    return u, cdf


@dataclass
class GfvPaths:
    times: np.ndarray
    states: np.ndarray  # (n_times, n_paths, R)
    events: int = 0
    max_renormalization: float = 0.0
    degenerate: int = 0

    def at(self, s):
        j = int(np.argmin(np.abs(self.times - s)))
        if not math.isclose(self.times[j], s, rel_tol=1e-9, abs_tol=1e-12):
            raise KeyError(f"time {s!r} was not recorded")
        return self.states[j]


def _unit(params):
    if not isinstance(params, ModelParams):
        raise ParameterError("params must be ModelParams")
    if not params.is_unit():
        raise ParameterError("the Fleming-Viot engines need a = b = 1 for every type")
    return params


def _grid(cfg, times):
    if times is None:
        return np.array([0.0, cfg.horizon])
    t = np.asarray(sorted(set(float(x) for x in times) | {0.0}))
    if t[0] < 0:
        raise ParameterError("times must be >= 0")
    return t


def direct_setup(params, cfg):
    al = params.alpha
    lam_res, lam_imm = gfv_jump_rates(al, params.mE, cfg.epsilon)
    ures, cres = jump_table(_res_density(al), cfg.epsilon, cfg.table_size)
    uimm, cimm = jump_table(_imm_density(al, params.mE), cfg.epsilon, cfg.table_size)
    return dict(lam_res=lam_res, lam_imm=lam_imm, ures=ures, cres=cres, uimm=uimm, cimm=cimm,
                mbar=params.m / params.mE,
                cdrift=small_immigration_drift(al, params.mE, cfg.epsilon))


def simulate_gfv_direct(params, cfg: GfvConfig, mu0, rng=None, times=None, threads=None,
                        setup=None):
    """Direct simulation of the truncated Beta-jump dynamics.

    Events with u < epsilon are removed; the first-order effect of removed
    immigration events is kept as the exact linear relaxation
    mu -> m/m(E) at rate ``small_immigration_drift`` between events.
    ``mu0`` is one probability vector or an (n_paths, R) array of them.
    """
    if not isinstance(params, ModelParams):
        raise ParameterError("params must be ModelParams")
    stream = as_stream(rng, cfg.seed)
    R = params.n_types
    n = int(cfg.n_paths)
    mu0 = np.asarray(mu0, dtype=float)
    if mu0.ndim == 1:
        prob_state(mu0, tol=1e-9)
    mu0 = np.ascontiguousarray(np.broadcast_to(mu0, (n, R)))
    tg = _grid(cfg, times)
    st = setup or direct_setup(params, cfg)
    out = np.empty((tg.size, n, R))
    bs = int(cfg.block_paths)

    def block(i):
        lo, hi = i * bs, min(n, (i + 1) * bs)
        sub = np.empty((tg.size, hi - lo, R))
        diag = np.zeros(2)
        K.gfv_direct_paths(mu0[lo:hi].copy(), stream.child(i).fresh(), st["lam_res"],
                           st["lam_imm"], st["ures"], st["cres"], st["uimm"], st["cimm"],
                           st["mbar"], st["cdrift"], tg, sub, diag)
        out[:, lo:hi] = sub
        return diag

    diags = run_blocks(block, -(-n // bs), threads)
    return GfvPaths(tg, out, int(sum(d[1] for d in diags)), float(max(d[0] for d in diags)))


def simulate_gfv_timechange(params, config: SimConfig, cfg: GfvConfig, eta0, rng=None,
                            times=None, threads=None, mass_floor=1e-300):
    """Normalized measure-valued paths indexed by Fleming-Viot time.

    FV time is accumulated by the trapezoid rule on the Euler grid of
    ``config``; ``config.T`` caps the real time spent per path.
    """
    p = _unit(params)
    stream = as_stream(rng, cfg.seed)
    R = p.n_types
    n = int(cfg.n_paths)
    eta0 = np.asarray(eta0, dtype=float)
    if eta0.shape[-1] != R or np.any(eta0 < 0) or np.any(eta0.sum(axis=-1) <= 0):
        raise ParameterError("eta0 must be a non-null nonnegative measure")
    eta0 = np.ascontiguousarray(np.broadcast_to(eta0, (n, R)))
    sg = _grid(cfg, times)
    cs = np.stack([step_constants(p.type_params(r), config) for r in range(R)])
    kappa = math.gamma(p.alpha + 2)
    nmax = config.steps(config.T)
    out = np.empty((sg.size, n, R))
    bs = int(cfg.block_paths)

    def block(i):
        lo, hi = i * bs, min(n, (i + 1) * bs)
        sub = np.empty((sg.size, hi - lo, R))
        counts = np.zeros(4, dtype=np.int64)
        tstop = np.empty(hi - lo)
        d, s = K.fv_timechange_paths(eta0[lo:hi].copy(), stream.child(i).fresh(), cs,
                                     config.h, nmax, sg, kappa, mass_floor, sub, counts, tstop)
        out[:, lo:hi] = sub
        return d, s, counts

    res = run_blocks(block, -(-n // bs), threads)
    degenerate = sum(r[0] for r in res)
    short = sum(r[1] for r in res)
    if degenerate:
        raise DegenerateStateError(f"{degenerate} paths reached the mass floor")
    if short:
        raise DegenerateStateError(
            f"{short} paths did not reach FV time {sg[-1]} within real time T={config.T}")
    return GfvPaths(sg, out, int(sum(r[2][0] + r[2][1] for r in res)))


@dataclass
class WeightedSample:
    points: np.ndarray  # (n, R) probability vectors
    weights: np.ndarray  # (n,)

    @property
    def ess(self):
        w = self.weights
        return float(w.sum() ** 2 / (w @ w))

    def mean(self, values):
        return float(self.weights @ values / self.weights.sum())


def stationary_gfv_sample(params, n, rng=None, threads=1):
    """Importance-weighted draws from the stationary law P_alpha.

    eta ~ Q_alpha (a = b = 1); returns mu = eta / eta(E) with weights
    Gamma(alpha+1)(m(E)-1) eta(E)^(-alpha), whose mean is 1.
    """
    p = _unit(params).require_fv()
    stream = as_stream(rng)
    eta = blocked(stream, n, lambda g, k: sample_linnik_measure(g, p, k), threads=threads)
    tot = eta.sum(axis=1)
    w = math.gamma(p.alpha + 1) * (p.mE - 1) * tot ** (-p.alpha)
    return WeightedSample(eta / tot[:, None], w)


def fv_moments(alpha, m, mu0, s, epsilon=0.0):
    """Exact E[mu_s] and E[mu_s mu_s^T] for the (optionally truncated) dynamics.

    First and second moments of the finite-type process satisfy a closed
    linear ODE.  With ``epsilon > 0`` it is the ODE of the direct route:
    jumps with u < epsilon removed, their immigration drift kept.
    """
    alpha = check_alpha(alpha)
    m = np.asarray(m, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    R = m.size
    mE = m.sum()
    i1 = 1.0 / (alpha + 1)
    r2 = 1.0 - special.betainc(1 - alpha, 1 + alpha, epsilon) if epsilon > 0 else 1.0
    i2 = (1 - alpha) / (alpha + 1)
    if epsilon > 0:
        i2 *= 1.0 - special.betainc(2 - alpha, alpha, epsilon)
    n1, n2 = R, R * R
    A = np.zeros((n1 + n2 + 1, n1 + n2 + 1))  # state [M1, vec(M2), 1]
    one = n1 + n2
    for i in range(R):
        A[i, i] = -i1 * mE
        A[i, one] = i1 * m[i]
    for i in range(R):
        for j in range(R):
            q = n1 + i * R + j
            A[q, q] = -r2 - 2 * i1 * mE + i2 * mE
            if i == j:
                A[q, i] += r2
                A[q, one] += i2 * m[i]
            A[q, j] += i1 * m[i] - i2 * m[i]
            A[q, i] += i1 * m[j] - i2 * m[j]
    x0 = np.concatenate([mu0, np.outer(mu0, mu0).ravel(), [1.0]])
    xs = linalg.expm(A * float(s)) @ x0
    return xs[:n1], xs[n1:one].reshape(R, R)


def linear_moments(alpha, m, mu0, f, s, epsilon=0.0):
    """(mean, variance) of <mu_s, f> from fv_moments."""
    f = np.asarray(f, dtype=float)
    M1, M2 = fv_moments(alpha, m, mu0, s, epsilon)
    mean = float(f @ M1)
    return mean, float(f @ M2 @ f - mean**2)


@dataclass
class DecayCurve:
    times: np.ndarray
    variance: np.ndarray
    std_error: np.ndarray
    n_outer: int
    n_inner: int


def gfv_variance_decay(params, phi, cfg: GfvConfig, times, rng=None, n_outer=256,
                       n_inner=256, threads=None):
    """Nested Monte Carlo estimate of var_P(S(t) phi) on a time grid.

    Outer points come from stationary_gfv_sample; for each, ``n_inner``
    direct-route paths estimate the conditional mean of phi(mu_t).
    ``phi`` maps an (..., R) array of probability vectors to (...).
    """
    p = _unit(params).require_fv()
    stream = as_stream(rng, cfg.seed)
    outer = stationary_gfv_sample(p, n_outer, stream.child(0))
    tg = _grid(cfg, times)
    inner_cfg = GfvConfig(cfg.epsilon, float(tg[-1]), n_inner, cfg.seed, "direct",
                          cfg.table_size, n_inner)
    st = direct_setup(p, inner_cfg)
    vals = np.empty((tg.size, n_outer, n_inner))

    def one(i):
        paths = simulate_gfv_direct(p, inner_cfg, np.broadcast_to(outer.points[i], (n_inner, p.n_types)),
                                    stream.child(1).child(i), times=tg, threads=1, setup=st)
        vals[:, i, :] = phi(paths.states)

    run_blocks(one, n_outer, threads)
    var = np.empty(tg.size)
    se = np.empty(tg.size)
    for j in range(tg.size):
        var[j], se[j], _ = nested_variance(outer.weights, vals[j])
    return DecayCurve(tg, var, se, n_outer, n_inner)
