"""Spectral gap b/2 of the constant-coefficient alpha-CIR model.

var_Q(T(t) Psi_1) has the closed form exp(-2 psi(1)) (exp(Delta(t)) - 1),
with Psi_1 = exp(-eta(E)).  Its log decays like -b t, twice the gap.
The Monte Carlo leg estimates the same variance by nested simulation.
"""
import numpy as np

from alphacir import analytics as A
from alphacir.model import CirParams, ModelParams
from alphacir.rng import RngStream
from alphacir.stats import GapTestConfig, fit_decay_rate, gap_acceptance_test

for b in (0.5, 1.0, 2.0):
    p = ModelParams(0.5, 1.0, b, 1.0)
    t = np.linspace(5 / b, 15 / b, 11)
    fit = fit_decay_rate(t, np.log(A.variance_semigroup_psi1(p, t)))
    print(f"b={b:<4g} gap {A.gap_exact(p):.3f}  closed-form slope {fit.slope:+.5f}  (-b = {-b:+.3f})")

print("\nMonte Carlo leg at b = 1 (about a minute)")
rep = gap_acceptance_test(CirParams(0.5, 1.0, 1.0, 1.0), GapTestConfig(), RngStream(0, 3))
for line in rep.lines():
    print(" ", line)
