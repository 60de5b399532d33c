"""Exact random-variate generators for the laws used by the engines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import ModelParams, as_model, check_alpha, measure_state
from .rng import RngStream, as_generator

BLOCK = 65536


@dataclass(frozen=True)
class StableSpec:
    """Positive stable law with Laplace transform exp(-scale * lam**alpha)."""

    alpha: float
    scale: float = 1.0

    def __post_init__(self):
        check_alpha(self.alpha)
        if not self.scale > 0:
            raise ParameterError("scale must be > 0")

    def sample(self, rng, size=None):
        return self.scale ** (1.0 / self.alpha) * sample_positive_stable(rng, self.alpha, size)

    def laplace(self, lam):
        return np.exp(-self.scale * np.asarray(lam, dtype=float) ** self.alpha)


def sample_positive_stable(rng, alpha, size=None):
    """Draw S > 0 with E[exp(-lam S)] = exp(-lam**alpha) (Kanter construction)."""
    alpha = check_alpha(alpha)
    g = as_generator(rng)
    u = np.pi * (g.random(size) + 2.0**-54)  # open interval (0, pi)
    w = g.standard_exponential(size)
    num = np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
    return num * (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)


def sample_pareto_jump(rng, exponent, cutoff, size=None):
    """Pareto variate with density proportional to y**(-1-exponent) on [cutoff, inf)."""
    g = as_generator(rng)
    return pareto_from_uniform(1.0 - g.random(size), exponent, cutoff)


def pareto_from_uniform(u, exponent, cutoff):
    """Inverse CDF: cutoff * u**(-1/exponent), u in (0, 1]."""
    if not (exponent > 0 and cutoff > 0):
        raise ParameterError("exponent and cutoff must be > 0")
    return cutoff * np.asarray(u, dtype=float) ** (-1.0 / exponent)


def sample_linnik_measure(rng, params, size=None):
    """Draw eta ~ Q_alpha, independently per type.

    eta(r) = (a/b)^(1/alpha) G^(1/alpha) S with G ~ Gamma(m/a, 1) and S
    positive alpha-stable, since E exp(-lam G^(1/alpha) S) = (1 + lam^alpha)^(-m/a).
    Returns shape ``(R,)`` or ``(size, R)``.
    """
    p = as_model(params).require_ergodic()
    g = as_generator(rng)
    shape = (p.n_types,) if size is None else (int(size), p.n_types)
    al = p.alpha
    gam = g.gamma(np.broadcast_to(p.m / p.a, shape))
    s = sample_positive_stable(g, al, shape)
    out = (p.a / p.b) ** (1.0 / al) * gam ** (1.0 / al) * s
    return np.where(p.m > 0, out, 0.0)


def sample_stable_random_measure(rng, alpha, eta, size=None):
    """eta'(r) = eta(r)^(1/alpha) S_r, so E exp(-<eta', f>) = exp(-<eta, f^alpha>)."""
    alpha = check_alpha(alpha)
    eta = measure_state(eta)
    shape = eta.shape if size is None else (int(size),) + eta.shape
    s = sample_positive_stable(rng, alpha, shape)
    return eta ** (1.0 / alpha) * s


def blocked(stream: RngStream, n: int, draw, block: int = BLOCK, threads: int = 1):
    """Draw ``n`` samples as concatenated blocks; block i uses stream.child(i).

    ``draw(generator, k)`` must return an array whose first axis has length
    k.  The result is identical for every thread count.
    """
    n = int(n)
    sizes = [min(block, n - i) for i in range(0, n, block)]
    jobs = [(stream.child(i), k) for i, k in enumerate(sizes)]

    def one(job):
        st, k = job
        return draw(st.fresh(), k)

    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]
    if not parts:
        return np.empty((0,))
    return np.concatenate(parts, axis=0)


def linnik_samples(stream: RngStream, params: ModelParams, n: int, threads: int = 1):
    return blocked(stream, n, lambda g, k: sample_linnik_measure(g, params, k), threads=threads)
