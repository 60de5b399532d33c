"""Compiled inner loops.  Each kernel owns the Generator it is handed."""
import math

import numba as nb
import numpy as np

# layout of the per-type constant vector used by cir_step
(C_DECAY, C_COMP, C_RB, C_RI, C_DRI, C_SIG2, C_IB, C_II, C_DB, C_DI,
 C_STSCALE, C_KMAX, C_GAUSS, C_ALPHA, NCONST) = range(15)


@nb.njit(cache=True, nogil=True)
def positive_stable(rng, alpha):
    # Kanter's representation, E exp(-lam S) = exp(-lam^alpha)
    u = math.pi * (rng.random() + 2.0**-54)
    w = rng.standard_exponential()
    num = math.sin(alpha * u) / math.sin(u) ** (1.0 / alpha)
    return num * (math.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)


@nb.njit(cache=True, nogil=True)
def spectrally_positive_stable(rng, g):
    # index g in (1, 2), no negative jumps, E exp(-lam X) = exp(lam^g)
    v = math.pi * (rng.random() - 0.5)
    w = rng.standard_exponential()
    t = math.tan(math.pi * g / 2)
    bb = math.atan(t) / g
    s = (1 + t * t) ** (1 / (2 * g))
    x = s * math.sin(g * (v + bb)) / math.cos(v) ** (1 / g) \
        * (math.cos(v - g * (v + bb)) / w) ** ((1 - g) / g)
    return x * (-math.cos(math.pi * g / 2)) ** (1 / g)


@nb.njit(cache=True, nogil=True)
def cir_step(x, rng, c, counts):
    """One Euler-thinning step of length h from state x (constants in c)."""
    z = x
    y = z - c[C_DECAY] * z + c[C_DRI]
    mu = z * c[C_RB]
    if mu > c[C_KMAX]:
        # frozen-rate compensated branching increment, drawn exactly
        y += (z * c[C_STSCALE]) ** (1.0 / (1.0 + c[C_ALPHA])) \
            * spectrally_positive_stable(rng, 1.0 + c[C_ALPHA])
        counts[3] += 1
    else:
        y -= z * c[C_COMP]
        if mu > 0.0:
            k = rng.poisson(mu)
            s = 0.0
            for _ in range(k):
                s += math.exp(rng.standard_exponential() * c[C_IB])
            y += c[C_DB] * s
            counts[0] += k
        if c[C_GAUSS] > 0.0 and z >= 9.0 * c[C_SIG2]:
            y += math.sqrt(z * c[C_SIG2]) * rng.standard_normal()
    if c[C_RI] > 0.0:
        k = rng.poisson(c[C_RI])
        for _ in range(k):
            y += c[C_DI] * math.exp(rng.standard_exponential() * c[C_II])
        counts[1] += k
    if y < 0.0:
        counts[2] += 1
        y = 0.0
    return y


@nb.njit(cache=True, nogil=True)
def cir_paths(z0, rng, c, rec_steps, out, counts):
    """Advance each path of z0; out[j, i] = state after rec_steps[j] steps."""
    n = z0.size
    nrec = rec_steps.size
    for i in range(n):
        x = z0[i]
        k = 0
        for j in range(nrec):
            while k < rec_steps[j]:
                x = cir_step(x, rng, c, counts)
                k += 1
            out[j, i] = x


@nb.njit(cache=True, nogil=True)
def mbi_paths(eta0, rng, cs, rec_steps, out, counts):
    """Joint multi-type paths: eta0 (n, R), out (nrec, n, R)."""
    n, R = eta0.shape
    nrec = rec_steps.size
    x = np.empty(R)
    for i in range(n):
        for r in range(R):
            x[r] = eta0[i, r]
        k = 0
        for j in range(nrec):
            while k < rec_steps[j]:
                for r in range(R):
                    x[r] = cir_step(x[r], rng, cs[r], counts)
                k += 1
            for r in range(R):
                out[j, i, r] = x[r]


@nb.njit(cache=True, nogil=True)
def fv_timechange_paths(eta0, rng, cs, h, tmax_steps, sgrid, kappa, floor, out, counts, tstop):
    """Normalized paths on a uniform FV-time grid.

    FV time s(t) = kappa * int_0^t eta_u(E)^(-alpha) du by the trapezoid
    rule; mu at grid points is interpolated linearly between steps.
    Returns the number of paths that hit the mass floor (their rows are
    left as NaN) and whether any path ran out of steps.
    """
    n, R = eta0.shape
    alpha = cs[0, C_ALPHA]
    ns = sgrid.size
    x = np.empty(R)
    xo = np.empty(R)
    degenerate = 0
    short = 0
    for i in range(n):
        tot = 0.0
        for r in range(R):
            x[r] = eta0[i, r]
            tot += x[r]
        for r in range(R):
            out[0, i, r] = x[r] / tot
        s = 0.0
        rate_old = kappa * tot ** (-alpha)
        j = 1
        k = 0
        dead = False
        while j < ns and k < tmax_steps:
            for r in range(R):
                xo[r] = x[r]
            tot_old = tot
            tot = 0.0
            for r in range(R):
                x[r] = cir_step(x[r], rng, cs[r], counts)
                tot += x[r]
            k += 1
            if tot <= floor:
                dead = True
                break
            rate_new = kappa * tot ** (-alpha)
            s_new = s + 0.5 * h * (rate_old + rate_new)
            while j < ns and sgrid[j] <= s_new:
                w = (sgrid[j] - s) / (s_new - s)
                for r in range(R):
                    out[j, i, r] = (1 - w) * xo[r] / tot_old + w * x[r] / tot
                j += 1
            s = s_new
            rate_old = rate_new
        tstop[i] = k * h
        if dead:
            degenerate += 1
            for jj in range(ns):
                for r in range(R):
                    out[jj, i, r] = np.nan
        elif j < ns:
            short += 1
            for jj in range(j, ns):
                for r in range(R):
                    out[jj, i, r] = np.nan
    return degenerate, short


@nb.njit(cache=True, nogil=True)
def table_draw(rng, ugrid, cdf):
    v = rng.random() * cdf[-1]
    j = np.searchsorted(cdf, v, side="right")
    if j < 1:
        j = 1
    elif j > cdf.size - 1:
        j = cdf.size - 1
    d = cdf[j] - cdf[j - 1]
    w = (v - cdf[j - 1]) / d if d > 0 else 0.0
    return ugrid[j - 1] + w * (ugrid[j] - ugrid[j - 1])


@nb.njit(cache=True, nogil=True)
def gfv_direct_paths(mu0, rng, lam_res, lam_imm, ures, cres, uimm, cimm, mbar, cdrift,
                     tgrid, out, diag):
    """Event-driven Beta-jump paths; diag = [max renormalization, events]."""
    n, R = mu0.shape
    nt = tgrid.size
    lam = lam_res + lam_imm
    mu = np.empty(R)
    for i in range(n):
        for r in range(R):
            mu[r] = mu0[i, r]
        t = 0.0
        j = 0
        while True:
            tn = t + rng.standard_exponential() / lam if lam > 0 else np.inf
            while j < nt and tgrid[j] < tn:
                e = math.exp(-cdrift * (tgrid[j] - t))
                for r in range(R):
                    out[j, i, r] = mbar[r] + (mu[r] - mbar[r]) * e
                j += 1
            if j >= nt:
                break
            e = math.exp(-cdrift * (tn - t))
            for r in range(R):
                mu[r] = mbar[r] + (mu[r] - mbar[r]) * e
            t = tn
            if rng.random() * lam < lam_res:
                u = table_draw(rng, ures, cres)
                v = rng.random()
                acc = 0.0
                k = R - 1
                for r in range(R):
                    acc += mu[r]
                    if v < acc:
                        k = r
                        break
            else:
                u = table_draw(rng, uimm, cimm)
                v = rng.random()
                acc = 0.0
                k = R - 1
                for r in range(R):
                    acc += mbar[r]
                    if v < acc:
                        k = r
                        break
            s = 0.0
            for r in range(R):
                mu[r] *= 1.0 - u
            mu[k] += u
            for r in range(R):
                s += mu[r]
            corr = abs(s - 1.0)
            if corr > diag[0]:
                diag[0] = corr
            for r in range(R):
                mu[r] /= s
            diag[1] += 1.0
