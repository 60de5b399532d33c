"""Euler-thinning simulation of the one-dimensional alpha-CIR process.

Per step of length h from state z:

* linear drift -(b/alpha) z h;
* branching jumps above delta_B: a Poisson number with mean
  z a delta_B^{-(1+alpha)} h / Gamma(1-alpha), Pareto(1+alpha) sizes, and
  their compensator -z a (alpha+1) delta_B^{-alpha} h / (alpha Gamma(1-alpha));
* immigration jumps above delta_I: Poisson mean m delta_I^{-alpha} h /
  Gamma(1-alpha), Pareto(alpha) sizes, plus the mean of the dropped small
  ones as a drift m alpha delta_I^{1-alpha} h / ((1-alpha) Gamma(1-alpha));
* the state is clamped at 0 and clamp events are counted.

Branching jumps below delta_B are either dropped (``small_jumps="drop"``) or
replaced by a centred Gaussian with their variance (``"gaussian"``, the
default).  When the expected number of branching jumps in one step exceeds
``max_jumps_per_step``, the whole compensated branching increment is drawn
exactly from its frozen-rate (1+alpha)-stable law instead; this keeps the
cost per step bounded on the heavy-tailed excursions caused by immigration.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .analytics import v_flow
from .errors import ClampRateError, ParameterError, UnsupportedParameterError
from .model import CirParams, ModelParams, as_model
from .rng import RngStream, as_stream
from .samplers import sample_positive_stable

SMALL_JUMP_MODES = ("gaussian", "drop")

# Weak-error constant C in |bias| <= C (h + delta_B^(1-alpha) + delta_I^(1-alpha)),
# fitted once on the h = delta in {0.02, 0.01, 0.005} ladder of
# demos/calibrate_weak_error.py and frozen here.
WEAK_ERROR_C = 0.031


@dataclass(frozen=True)
class SimConfig:
    h: float = 1e-3
    delta_B: float = 1e-3
    delta_I: float = 1e-3
    T: float = 1.0
    n_paths: int = 1000
    seed: int = 0
    small_jumps: str = "gaussian"
    max_jumps_per_step: float = 256.0
    block_paths: int = 1024
    max_clamp_rate: float = 1e-3

    def __post_init__(self):
        for k in ("h", "delta_B", "delta_I"):
            v = getattr(self, k)
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{k}={v!r} must be > 0")
        if not (self.T >= 0 and np.isfinite(self.T)):
            raise ParameterError(f"T={self.T!r} must be >= 0")
        if int(self.n_paths) < 1:
            raise ParameterError("n_paths must be >= 1")
        if self.small_jumps not in SMALL_JUMP_MODES:
            raise ParameterError(f"small_jumps must be one of {SMALL_JUMP_MODES}")
        if not self.max_jumps_per_step > 0:
            raise ParameterError("max_jumps_per_step must be > 0")
        if int(self.block_paths) < 1:
            raise ParameterError("block_paths must be >= 1")

    def steps(self, t):
        """Number of h-steps to reach time t (t must be a multiple of h)."""
        k = t / self.h
        n = int(round(k))
        if abs(k - n) > 1e-9 * max(1.0, k):
            raise ParameterError(f"time {t!r} is not a multiple of h={self.h!r}")
        return n

    def grid(self):
        return np.arange(self.steps(self.T) + 1) * self.h

    def halved(self):
        return replace(self, h=self.h / 2, delta_B=self.delta_B / 2, delta_I=self.delta_I / 2)

    def bias_scale(self, alpha):
        """h + delta_B^(1-alpha) + delta_I^(1-alpha), the weak-error scale."""
        return self.h + self.delta_B ** (1 - alpha) + self.delta_I ** (1 - alpha)


@dataclass
class PathRecord:
    """Grid states of one or many paths plus event counters.

    ``states`` has shape ``(len(times),)`` for one path, ``(len(times), n)``
    for a batch, or ``(len(times), n, R)`` for measure-valued batches.
    """

    times: np.ndarray
    states: np.ndarray
    branch_jumps: int = 0
    immigration_jumps: int = 0
    clamps: int = 0
    stable_steps: int = 0
    steps: int = 0

    @property
    def clamp_rate(self):
        return self.clamps / self.steps if self.steps else 0.0

    def at(self, t):
        j = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[j], t, rel_tol=1e-9, abs_tol=1e-12):
            raise KeyError(f"time {t!r} was not recorded")
        return self.states[j]


def step_constants(params: CirParams, config: SimConfig, h=None):
    """Constant vector consumed by the compiled step."""
    p = params
    al = p.alpha
    h = config.h if h is None else h
    G = math.gamma(1 - al)
    dB, dI = config.delta_B, config.delta_I
    c = np.zeros(K.NCONST)
    c[K.C_DECAY] = p.b / al * h
    c[K.C_COMP] = p.a * (al + 1) / (al * G) * dB ** (-al) * h
    c[K.C_RB] = p.a * dB ** (-(1 + al)) / G * h
    c[K.C_RI] = p.m * dI ** (-al) / G * h
    c[K.C_DRI] = p.m * al * dI ** (1 - al) / ((1 - al) * G) * h
    c[K.C_SIG2] = p.a * (al + 1) / G * dB ** (1 - al) / (1 - al) * h
    c[K.C_IB] = 1 / (1 + al)
    c[K.C_II] = 1 / al
    c[K.C_DB] = dB
    c[K.C_DI] = dI
    c[K.C_STSCALE] = p.a * h / al
    c[K.C_KMAX] = config.max_jumps_per_step
    c[K.C_GAUSS] = 1.0 if config.small_jumps == "gaussian" else 0.0
    c[K.C_ALPHA] = al
    return c


def _as_cir(params):
    if isinstance(params, CirParams):
        return params
    if isinstance(params, ModelParams) and params.n_types == 1:
        return params.type_params(0)
    raise ParameterError("the one-dimensional engine needs CirParams or a one-type ModelParams")


def default_threads():
    env = os.environ.get("ALPHACIR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError("ALPHACIR_THREADS must be an integer") from None
    return 1


def run_blocks(fn, n_blocks, threads=None):
    """Map fn over block indices; results come back in index order."""
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or n_blocks <= 1:
        return [fn(i) for i in range(n_blocks)]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, range(n_blocks)))


def step_euler_thinning(state, params, config, rng, counts=None):
    """One step of length ``config.h``; ``rng`` is a numpy Generator."""
    if state < 0:
        raise ParameterError("state must be >= 0")
    c = step_constants(_as_cir(params), config)
    counts = np.zeros(4, dtype=np.int64) if counts is None else counts
    return K.cir_step(float(state), rng, c, counts)


def _collect(times, states, counts, steps):
    return PathRecord(times, states, int(counts[0]), int(counts[1]), int(counts[2]),
                      int(counts[3]), int(steps))


def _check_clamps(rec, config):
    if rec.steps and rec.clamp_rate > config.max_clamp_rate:
        raise ClampRateError(
            f"clamp rate {rec.clamp_rate:.3g} exceeds {config.max_clamp_rate:.3g}")
    return rec


def simulate_path(params, config, z0, rng):
    """One path on the full step grid [0, T]."""
    if z0 < 0:
        raise ParameterError("z0 must be >= 0")
    gen = as_stream(rng, config.seed).generator if not isinstance(rng, np.random.Generator) else rng
    c = step_constants(_as_cir(params), config)
    n = config.steps(config.T)
    rec_steps = np.arange(n + 1, dtype=np.int64)
    out = np.empty((n + 1, 1))
    counts = np.zeros(4, dtype=np.int64)
    K.cir_paths(np.array([float(z0)]), gen, c, rec_steps, out, counts)
    return _check_clamps(_collect(rec_steps * config.h, out[:, 0], counts, n), config)


def _record_steps(config, record_times):
    if record_times is None:
        return np.arange(config.steps(config.T) + 1, dtype=np.int64)
    ks = sorted({0, *(config.steps(float(t)) for t in record_times)})
    return np.asarray(ks, dtype=np.int64)


def simulate_paths(params, config, z0, rng=None, record_times=None, threads=None,
                   check_clamps=True):
    """Batch of ``config.n_paths`` independent paths.

    Block ``i`` of ``config.block_paths`` paths uses ``stream.child(i)``, so
    the output does not depend on the thread count.  ``z0`` is a scalar or a
    length-n array of starting states.
    """
    stream = as_stream(rng, config.seed)
    c = step_constants(_as_cir(params), config)
    n = int(config.n_paths)
    z0 = np.broadcast_to(np.asarray(z0, dtype=float), (n,)).copy()
    if np.any(z0 < 0):
        raise ParameterError("starting states must be >= 0")
    rec_steps = _record_steps(config, record_times)
    bs = int(config.block_paths)
    nb = -(-n // bs)
    out = np.empty((rec_steps.size, n))

    def block(i):
        lo, hi = i * bs, min(n, (i + 1) * bs)
        cnt = np.zeros(4, dtype=np.int64)
        sub = np.empty((rec_steps.size, hi - lo))
        K.cir_paths(z0[lo:hi], stream.child(i).fresh(), c, rec_steps, sub, cnt)
        out[:, lo:hi] = sub
        return cnt

    counts = np.sum(run_blocks(block, nb, threads), axis=0)
    rec = _collect(rec_steps * config.h, out, counts, int(rec_steps[-1]) * n)
    return _check_clamps(rec, config) if check_clamps else rec


def no_immigration_sampler(params, config, refine=4):
    """Default sub-sampler for the no-immigration kernel p_t.

    Runs the Euler-thinning engine with m = 0 at (h/refine, delta_B/refine).
    Returns ``draw(z0_array, t, stream) -> array``.
    """
    cp = _as_cir(params)
    p0 = CirParams(cp.alpha, cp.a, cp.b, 0.0)
    sub = replace(config, h=config.h / refine, delta_B=config.delta_B / refine,
                  delta_I=config.delta_I / refine)
    c0 = step_constants(p0, sub)
    if c0[K.C_DECAY] + c0[K.C_COMP] >= 1.0:
        raise UnsupportedParameterError(
            "sub-sampler drift (b/alpha + compensator) * h must be < 1; reduce h or raise delta_B")

    def draw(z0, t, stream):
        z0 = np.asarray(z0, dtype=float)
        if t == 0:
            return z0.copy()
        nsteps = max(1, int(math.ceil(t / sub.h - 1e-9)))
        c = step_constants(p0, sub, h=t / nsteps)
        bs = int(sub.block_paths)
        out = np.empty(z0.size)
        for i in range(-(-z0.size // bs)):
            lo, hi = i * bs, min(z0.size, (i + 1) * bs)
            rec = np.empty((2, hi - lo))
            K.cir_paths(z0[lo:hi].copy(), stream.child(i).fresh(), c,
                        np.array([0, nsteps], dtype=np.int64), rec, np.zeros(4, dtype=np.int64))
            out[lo:hi] = rec[1]
        return out

    return draw


def sample_fixed_time_convolution(params, eta0, t, N, rng=None, config=None, size=None,
                                  sampler=None):
    """Draws from the N-fold convolution approximation of the time-t law.

    draw = X_t(eta0) + sum_{k=1..N} X_{tk/N}(((t/N) m)^(1/alpha) S_k), where X
    is the no-immigration process and S_k are independent positive stable
    variables.  Its Laplace transform is
    exp[-eta0 V_t(lam) - sum_k (t/N) m V_{tk/N}(lam)^alpha] exactly, up to the
    error of the p_t ``sampler``.
    """
    cp = _as_cir(params)
    N = int(N)
    if N < 1:
        raise ParameterError("N must be >= 1")
    if eta0 < 0 or t < 0:
        raise ParameterError("eta0 and t must be >= 0")
    config = config or SimConfig()
    stream = as_stream(rng, config.seed)
    draw = sampler or no_immigration_sampler(cp, config)
    n = 1 if size is None else int(size)
    total = draw(np.full(n, float(eta0)), float(t), stream.child(0))
    if cp.m > 0 and t > 0:
        g = stream.child(1).fresh()
        for k in range(1, N + 1):
            y = (t / N * cp.m) ** (1 / cp.alpha) * sample_positive_stable(g, cp.alpha, n)
            total += draw(y, t * k / N, stream.child(k + 1))
    return float(total[0]) if size is None else total


def convolution_exponent(params, eta0, lam, t, N):
    """-log of the Laplace transform targeted by the N-fold scheme."""
    cp = _as_cir(params)
    p = ModelParams(cp.alpha, cp.a, cp.b, max(cp.m, 1.0))
    vt = float(v_flow(p, [lam], t)[0])
    tk = t * np.arange(1, N + 1) / N
    vk = v_flow(p, [lam], tk)[:, 0]
    return eta0 * vt + t / N * cp.m * float(np.sum(vk**cp.alpha))
