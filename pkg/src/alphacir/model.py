"""Parameter and state containers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ErgodicityError, ParameterError, AssumptionError


def _vec(x, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} must be finite")
    return arr


def check_alpha(alpha, allow_one=False):
    alpha = float(alpha)
    upper_ok = alpha <= 1.0 if allow_one else alpha < 1.0
    if not (alpha > 0.0 and upper_ok):
        rng = "(0,1]" if allow_one else "(0,1)"
        raise ParameterError(f"alpha={alpha!r} must lie in {rng}")
    return alpha


@dataclass(frozen=True)
class ModelParams:
    """Triplet (a, b, m) on a finite type space with stability index alpha.

    Parameters
    ----------
    alpha : float
        Index in (0, 1).
    a, b, m : array_like
        Per-type coefficients; a > 0, m >= 0 with positive total.
        Scalars broadcast against the other coefficients.
    types : sequence of str, optional
        Labels; default ``r1, r2, ...``.
    """

    alpha: float
    a: np.ndarray
    b: np.ndarray
    m: np.ndarray
    types: tuple = field(default=())

    def __post_init__(self):
        alpha = check_alpha(self.alpha)
        a, b, m = (_vec(v, k) for v, k in ((self.a, "a"), (self.b, "b"), (self.m, "m")))
        try:
            a, b, m = np.broadcast_arrays(a, b, m)
        except ValueError:
            raise ParameterError("a, b, m have incompatible lengths") from None
        a, b, m = (np.array(v, dtype=float) for v in (a, b, m))
        if np.any(a <= 0):
            raise ParameterError("a(r) must be > 0 for every type")
        if np.any(m < 0):
            raise ParameterError("m(r) must be >= 0 for every type")
        if m.sum() <= 0:
            raise ParameterError("m(E) = sum of m(r) must be > 0")
        types = tuple(self.types) or tuple(f"r{i + 1}" for i in range(a.size))
        if len(types) != a.size:
            raise ParameterError("types has the wrong length")
        for v in (a, b, m):
            v.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "types", types)

    @property
    def n_types(self):
        return self.a.size

    @property
    def mE(self):
        return float(self.m.sum())

    def require_ergodic(self):
        if np.any(self.b <= 0):
            raise ErgodicityError("b(r) must be > 0 for every type")
        return self

    def require_fv(self):
        if self.mE <= 1.0:
            raise AssumptionError(f"m(E)={self.mE!r} must exceed 1")
        return self

    def is_unit(self):
        return bool(np.all(self.a == 1.0) and np.all(self.b == 1.0))

    def type_params(self, r):
        return CirParams(self.alpha, float(self.a[r]), float(self.b[r]), float(self.m[r]))


@dataclass(frozen=True)
class CirParams:
    """Scalar coefficients of the one-dimensional model."""

    alpha: float
    a: float
    b: float
    m: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        for k in ("a", "b", "m"):
            v = float(getattr(self, k))
            if not np.isfinite(v):
                raise ParameterError(f"{k} must be finite")
            object.__setattr__(self, k, v)
        if self.a <= 0:
            raise ParameterError("a must be > 0")
        if self.m < 0:
            raise ParameterError("m must be >= 0")

    def to_model(self):
        """One-type ModelParams; needs m > 0."""
        return ModelParams(self.alpha, [self.a], [self.b], [self.m])


def as_model(params):
    if isinstance(params, CirParams):
        return params.to_model()
    return params


class ExpFunctional:
    """Psi(eta) = sum_i c_i exp(-<eta, f_i>) with strictly positive f_i.

    Parameters
    ----------
    coeffs : array_like, shape (k,)
    fs : array_like, shape (k, R)
    """

    def __init__(self, coeffs, fs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        f = np.asarray(fs, dtype=float)
        if f.ndim == 1:
            f = f[:, None] if c.size == f.size else f[None, :]
        if f.ndim != 2 or f.shape[0] != c.size:
            raise ParameterError("fs must have shape (len(coeffs), n_types)")
        if c.size and not np.all(f > 0):
            raise ParameterError("every test function entry must be > 0")
        self.coeffs = c
        self.fs = f

    @classmethod
    def single(cls, f, c=1.0):
        return cls([c], [np.atleast_1d(np.asarray(f, dtype=float))])

    def __len__(self):
        return self.coeffs.size

    def scaled(self, k):
        return ExpFunctional(k * self.coeffs, self.fs)

    def __call__(self, eta):
        eta = np.asarray(eta, dtype=float)
        return np.exp(-(eta @ self.fs.T)) @ self.coeffs

    def __repr__(self):
        return f"ExpFunctional(k={len(self)}, n_types={self.fs.shape[1]})"


def measure_state(mass):
    """Validate a nonnegative mass vector."""
    arr = np.array(mass, dtype=float, ndmin=1)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ParameterError("measure entries must be finite and >= 0")
    return arr


def prob_state(weight, tol=1e-12):
    arr = np.array(weight, dtype=float, ndmin=1)
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > tol:
        raise ParameterError("probability weights must be >= 0 and sum to 1")
    return arr
