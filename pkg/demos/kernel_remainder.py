"""Definiteness of the remainder kernel 2 K~ - J.

Prints the smallest Gram eigenvalue on random log-spaced grids for each
alpha, the same for the reversed kernel J - 2 K~ (which is indefinite),
and the inequalities 2 V(F) >= U(F) and the Poincare bound on random
exponential functionals.
"""
import numpy as np

from alphacir import kernels as KV

g = np.random.default_rng(0)
spec = KV.GridSpec(32, 1e-3, 50.0)
print("alpha   min eig 2K~-J   min eig J-2K~")
for al in np.arange(0.1, 1.0, 0.1):
    ev, rev = np.inf, np.inf
    for _ in range(20):
        pts = spec.draw(g)
        ev = min(ev, KV.gram_psd_test(KV.remainder_kernel, al, pts))
        rev = min(rev, KV.gram_psd_test(lambda a, s, t: -KV.remainder_kernel(a, s, t), al, pts))
    print(f"{al:4.1f}   {ev:+.3e}      {rev:+.3e}")

ratio = []
for _ in range(1000):
    F = KV.random_exp_functional(g, 1)
    U, V = KV.check_UV_inequality(float(g.uniform(0.05, 0.95)), F)
    if V > 0:
        ratio.append(U / V)
print(f"\nlargest U/V over 1000 random F: {max(ratio):.4f} (bound 2)")

ratio = []
for _ in range(1000):
    p = KV.random_params(g)
    var, bound = KV.check_poincare(p, KV.random_exp_functional(g, p.n_types))
    ratio.append(var / bound)
print(f"largest var / (2 max(1/b) E) over 1000 panels: {max(ratio):.4f} (bound 1)")
