"""Intrinsic kernels, Gram definiteness and the functional inequalities.

Everything here is closed form.  Kernels act on positive scalars s, t (the
exponents of F(z) = sum_i c_i exp(-lambda_i z)) and broadcast like numpy.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np

from .analytics import dirichlet_form, kernels_KB_KI, psi, variance_Q
from .errors import AlphaCirError, ParameterError
from .model import ExpFunctional, ModelParams, check_alpha
from .rng import as_generator


def _pos(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s <= 0) or np.any(t <= 0):
        raise ParameterError("kernels need s, t > 0")
    return s, t


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def kernel_K(alpha, s, t):
    """K(s,t) from 2K = rho(s+t) K_B(s,t) + K_I(s,t); alpha = 1 is allowed."""
    alpha = check_alpha(alpha, allow_one=True)
    s, t = _pos(s, t)
    kb, ki = kernels_KB_KI(alpha, s, t)
    return _out(0.5 * (psi(alpha, s + t, 1) * kb + ki))


def kernel_K_explicit(alpha, s, t):
    """The same K written with explicit powers of s + t (independent form)."""
    alpha = check_alpha(alpha, allow_one=True)
    s, t = _pos(s, t)
    u = s + t
    part_b = u ** (alpha - 1) / (1 + u**alpha) * (u ** (alpha + 1) - s ** (alpha + 1) - t ** (alpha + 1))
    part_i = s**alpha + t**alpha - u**alpha
    return _out(0.5 * (part_b + part_i))


def kernel_K_alpha_one(s, t):
    """K at alpha = 1: st / (1 + s + t)."""
    s, t = _pos(s, t)
    return _out(s * t / (1 + s + t))


def kernel_Ktilde_alpha_one(s, t):
    """d_s d_t [st / (1 + s + t)] = (1 + s + t + 2st) / (1 + s + t)^3."""
    s, t = _pos(s, t)
    u = 1 + s + t
    return _out((u + 2 * s * t) / u**3)


def _kb_partial_sum(alpha, s, t, ki):
    # (d_s + d_t) K_B = (alpha+1)/alpha [(s+t)^alpha - K_I]
    return (alpha + 1) / alpha * ((s + t) ** alpha - ki)


def kernel_Ktilde(alpha, s, t):
    """Analytic d_s d_t K(s, t)."""
    alpha = check_alpha(alpha, allow_one=True)
    s, t = _pos(s, t)
    u = s + t
    kb, ki = kernels_KB_KI(alpha, s, t)
    two = (psi(alpha, u, 3) * kb
           + psi(alpha, u, 2) * _kb_partial_sum(alpha, s, t, ki)
           + psi(alpha, u, 1) * (alpha + 1) * u ** (alpha - 1)
           + alpha * (1 - alpha) * u ** (alpha - 2))
    return _out(0.5 * two)


def kernel_J(alpha, s, t):
    """J(s, t) = -psi''(s + t)."""
    s, t = _pos(s, t)
    return _out(-psi(alpha, s + t, 2))


def remainder_terms(alpha, s, t):
    """The three nonnegative-definite pieces of 2 K~ - J."""
    alpha = check_alpha(alpha, allow_one=True)
    s, t = _pos(s, t)
    u = s + t
    kb, ki = kernels_KB_KI(alpha, s, t)
    r1, r2, r3 = psi(alpha, u, 1), psi(alpha, u, 2), psi(alpha, u, 3)
    mixed = r3 * kb + r2 * _kb_partial_sum(alpha, s, t, ki) + r1 * (alpha + 1) * u ** (alpha - 1)
    return (alpha / (alpha + 1) * r3 * kb, -r2 * ki, mixed / (alpha + 1))


def remainder_kernel(alpha, s, t, check=True, rtol=1e-10):
    """2 K~(s,t) - J(s,t), computed directly and cross-checked by decomposition."""
    direct = 2 * np.asarray(kernel_Ktilde(alpha, s, t)) - np.asarray(kernel_J(alpha, s, t))
    if check:
        dec = sum(remainder_terms(alpha, s, t))
        scale = np.maximum(np.abs(direct), np.abs(dec))
        if np.any(np.abs(direct - dec) > rtol * scale + 1e-300):
            raise AlphaCirError("remainder identity failed beyond tolerance")
    return _out(direct)


def remainder_kernel_decomposed(alpha, s, t):
    return _out(sum(remainder_terms(alpha, s, t)))


def _kernel_K_mp(alpha, s, t):
    u = s + t
    part_b = u ** (alpha - 1) / (1 + u**alpha) * (u ** (alpha + 1) - s ** (alpha + 1) - t ** (alpha + 1))
    return (part_b + s**alpha + t**alpha - u**alpha) / 2


def finite_difference_Ktilde(alpha, s, t, step=1e-4, dps=40):
    """Central mixed difference of K (test oracle).

    K is evaluated in ``dps``-digit arithmetic so that the four-point
    stencil carries only its O(step^2) truncation error.
    """
    with mpmath.workdps(dps):
        a, s, t, h = (mpmath.mpf(float(x)) for x in (alpha, s, t, step))
        k = lambda x, y: _kernel_K_mp(a, x, y)
        val = (k(s + h, t + h) - k(s + h, t - h) - k(s - h, t + h) + k(s - h, t - h)) / (4 * h * h)
        return float(val)


@dataclass(frozen=True)
class GridSpec:
    """Random log-spaced grid: n sorted log-uniform points in [s_min, s_max]."""

    n_points: int = 32
    s_min: float = 1e-3
    s_max: float = 50.0

    def __post_init__(self):
        if not 1 <= self.n_points <= 64:
            raise ParameterError("Gram grids hold 1 to 64 points")
        if not 0 < self.s_min < self.s_max:
            raise ParameterError("grid needs 0 < s_min < s_max")

    def draw(self, rng):
        g = as_generator(rng)
        x = g.uniform(np.log(self.s_min), np.log(self.s_max), self.n_points)
        return np.sort(np.exp(x))

    def regular(self):
        return np.geomspace(self.s_min, self.s_max, self.n_points)


@dataclass
class KernelGrid:
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.shape != (self.points.size,) * 2 or not np.all(np.isfinite(v)):
            raise AlphaCirError("Gram matrix must be square and finite")
        if not np.allclose(v, v.T, rtol=1e-12, atol=0):
            raise AlphaCirError("Gram matrix is not symmetric")


def gram_matrix(kernel, alpha, points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 1 or pts.size > 64:
        raise ParameterError("Gram grids hold at most 64 points")
    s, t = np.meshgrid(pts, pts, indexing="ij")
    return KernelGrid(pts, np.asarray(kernel(alpha, s, t), dtype=float))


def gram_psd_test(kernel, alpha, grid):
    """Minimum eigenvalue of the Gram matrix of ``kernel`` on ``grid``.

    ``grid`` is an array of points or a (GridSpec, rng) pair.
    """
    if isinstance(grid, tuple):
        spec, rng = grid
        grid = spec.draw(rng)
    kg = gram_matrix(kernel, alpha, grid)
    m = 0.5 * (kg.values + kg.values.T)
    try:
        ev = np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:
        raise AlphaCirError(f"eigensolver failed: {exc}") from exc
    return float(ev[0])


def check_UV_inequality(alpha, F: ExpFunctional):
    """(U(F), V(F)) for F(z) = sum_i c_i exp(-lambda_i z) with scalar lambda_i."""
    if len(F) == 0:
        return 0.0, 0.0
    lam = np.asarray(F.fs, dtype=float).reshape(len(F), -1)
    if lam.shape[1] != 1:
        raise ParameterError("check_UV_inequality uses scalar exponents")
    lam = lam[:, 0]
    c = F.coeffs
    li, lj = lam[:, None], lam[None, :]
    du = psi(alpha, li) + psi(alpha, lj) - psi(alpha, li + lj)
    kk = kernel_K(alpha, np.broadcast_to(li, du.shape), np.broadcast_to(lj, du.shape))
    return float(c @ du @ c), float(c @ kk @ c)


def check_poincare(params: ModelParams, psi_fn: ExpFunctional, gamma=2.0):
    """(variance, gamma * max(1/b) * Dirichlet form) of an exponential functional."""
    p = params.require_ergodic()
    var = variance_Q(p, psi_fn)
    bound = gamma * float(np.max(1.0 / p.b)) * dirichlet_form(p, psi_fn)
    return var, bound


def random_exp_functional(rng, n_types=1, max_terms=6, c_range=(-2.0, 2.0), lam_range=(0.05, 20.0)):
    g = as_generator(rng)
    k = int(g.integers(1, max_terms + 1))
    c = g.uniform(*c_range, k)
    lam = np.exp(g.uniform(np.log(lam_range[0]), np.log(lam_range[1]), (k, n_types)))
    return ExpFunctional(c, lam)


def random_params(rng, max_types=4):
    g = as_generator(rng)
    R = int(g.integers(1, max_types + 1))
    alpha = float(g.uniform(0.05, 0.95))
    a = np.exp(g.uniform(np.log(0.2), np.log(5.0), R))
    b = np.exp(g.uniform(np.log(0.2), np.log(5.0), R))
    m = np.exp(g.uniform(np.log(0.1), np.log(5.0), R))
    return ModelParams(alpha, a, b, m)
