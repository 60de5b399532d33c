"""Fit the weak-error constant C used in the Euler-thinning bias budget.

The simulated Laplace functional E exp(-lambda eta_t(E)) from eta_0 = 1 is
compared with its closed form on a ladder h = delta_B = delta_I in
{0.02, 0.01, 0.005}.  C is the smallest constant with

    |bias| <= 3 SE + C (h + delta_B^(1-alpha) + delta_I^(1-alpha))

at every ladder point; the library freezes the result as WEAK_ERROR_C.
The last two rungs also show how much halving the step shrinks the bias.

    python demos/calibrate_weak_error.py [--n 400000] [--threads 1]
"""
import argparse

from alphacir.cir import WEAK_ERROR_C, SimConfig
from alphacir.model import ModelParams
from alphacir.rng import RngStream
from alphacir.stats import fit_bias_constant, halving_check, laplace_bias

TIMES = (0.5, 1.0, 2.0)
LAMBDAS = (0.5, 1.0, 2.0)
STEPS = (0.02, 0.01, 0.005)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    p = ModelParams(0.5, 1.0, 1.0, 1.0)
    ladder = {}
    for i, h in enumerate(STEPS):
        sim = SimConfig(h=h, delta_B=h, delta_I=h, T=2.0, n_paths=args.n)
        ladder[h] = laplace_bias(p, sim, [1.0], TIMES, LAMBDAS, RngStream(args.seed, (99, i)), args.threads)
        print(f"h = delta = {h:g}  (scale {sim.bias_scale(p.alpha):.4f})")
        for pt in ladder[h]:
            print(f"  t={pt.t:<4g} lambda={pt.lam:<4g} bias {pt.bias.value:+.5f} +/- {pt.bias.std_error:.5f}")

    c = fit_bias_constant([pt for rung in ladder.values() for pt in rung])
    print(f"\nfitted C = {c:.5f}   (frozen library value {WEAK_ERROR_C})")

    for hc, hf in zip(STEPS, STEPS[1:]):
        rows = halving_check(ladder[hc], ladder[hf])
        ratio = sum(abs(r[4]) for r in rows) / sum(abs(r[3]) for r in rows)
        ok = sum(r[2] for r in rows)
        print(f"halving {hc:g} -> {hf:g}: summed |bias| ratio {ratio:.3f}, {ok}/{len(rows)} points pass")


if __name__ == "__main__":
    main()
