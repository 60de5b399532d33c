"""Command-line experiment runner.

    alphacir <experiment> [--config PATH] [--seed N] [--out DIR] [--threads N]
    alphacir run PATH [--seed N] [--out DIR] [--threads N]

Each run writes CSV artifacts and ``report.txt`` into the output directory
and exits 0 iff every declared check passed (1 if a check failed, 2 on a
configuration or runtime error).
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import analytics as A
from .cir import SimConfig
from .config import KINDS, ExperimentConfig, defaults, load
from .errors import AlphaCirError, ConfigError
from .model import ExpFunctional, ModelParams
from .rng import RngStream

THREAD_ENV = "ALPHACIR_THREADS"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(v)


def emit_csv(records, schema, path):
    """Write records (dicts or sequences) under a header row.

    Floats carry 17 significant digits; lines end in LF; row order is the
    order of ``records``.
    """
    schema = list(schema)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(schema)
    for rec in records:
        if isinstance(rec, dict):
            if set(rec) != set(schema):
                raise ValueError(f"record keys {sorted(rec)} do not match schema {schema}")
            row = [rec[k] for k in schema]
        else:
            row = list(rec)
            if len(row) != len(schema):
                raise ValueError(f"record of length {len(row)} does not match schema {schema}")
        w.writerow([_fmt(v) for v in row])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


class Run:
    """Collects artifacts and checks, then writes everything at the end."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.tables = []
        self.checks = []
        self.notes = []

    def table(self, name, schema, records):
        self.tables.append((name, list(schema), list(records)))

    def check(self, name, passed, detail=""):
        self.checks.append((name, bool(passed), detail))

    def note(self, text):
        self.notes.append(text)

    @property
    def passed(self):
        return all(p for _, p, _ in self.checks)

    def report(self):
        out = [f"alphacir {__version__}", f"experiment: {self.cfg.kind}",
               "resolved config:"]
        out += ["  " + ln for ln in self.cfg.resolved_yaml().splitlines()]
        out.append("checks:")
        for name, p, detail in self.checks:
            out.append(f"  {'PASS' if p else 'FAIL'} {name}" + (f" [{detail}]" if detail else ""))
        if self.notes:
            out.append("notes:")
            out += ["  " + n for n in self.notes]
        out.append(f"status: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(out) + "\n"

    def write(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, schema, recs in self.tables:
            emit_csv(recs, schema, out_dir / name)
        (out_dir / "report.txt").write_bytes(self.report().encode("utf-8"))


def model_of(cfg):
    a, b, m = cfg["model.a"], cfg["model.b"], cfg["model.m"]
    types = tuple(cfg["model.types"] or ())
    return ModelParams(cfg["model.alpha"], a, b, m, types)


def sim_of(cfg, **over):
    kw = dict(h=cfg["sim.h"], delta_B=cfg["sim.delta_B"], delta_I=cfg["sim.delta_I"],
              T=cfg["sim.T"], n_paths=cfg["sim.n_paths"], seed=cfg["seed"],
              small_jumps=cfg["sim.small_jumps"], max_jumps_per_step=cfg["sim.max_jumps_per_step"])
    kw.update(over)
    return SimConfig(**kw)


def exp_simulate(run, cfg, threads):
    from .mbi import simulate_measure_path
    from .stats import compare, empirical_laplace
    p = model_of(cfg)
    sim = sim_of(cfg)
    root = RngStream(cfg["seed"])
    eta0 = np.asarray(cfg["simulate.eta0"] or np.ones(p.n_types))
    times = cfg["simulate.record_times"]
    rec = simulate_measure_path(p, sim, eta0, root.child(0), record_times=times, threads=threads)
    recs = []
    budget = cfg["simulate.bias_C"] * sim.bias_scale(p.alpha)
    for t in times:
        x = rec.at(t)
        for lam in cfg["simulate.lambdas"]:
            f = np.full(p.n_types, lam)
            est = empirical_laplace(x, f)
            exact = math.exp(-float(A.log_laplace_closed(p, eta0, f, t)))
            c = compare(est, exact, cfg["simulate.k_se"], budget)
            recs.append([t, lam, est.value, est.std_error, exact, c.tolerance, c.passed])
            run.check(f"Laplace functional t={t:g} lambda={lam:g}", c.passed, str(c))
    run.table("laplace.csv", ["t", "lambda", "estimate", "std_error", "closed_form",
                              "tolerance", "pass"], recs)
    run.check("clamp rate below limit", rec.clamp_rate <= sim.max_clamp_rate,
              f"{rec.clamp_rate:.3g}")
    k = cfg["simulate.export_paths"]
    if k:
        ex = simulate_measure_path(p, sim_of(cfg, n_paths=k), eta0, root.child(1), threads=threads)
        rows = []
        for i in range(k):
            for j, t in enumerate(ex.times):
                rows.append([i, t, *ex.states[j, i]])
        run.table("paths.csv", ["replica", "t", *[f"state_{lab}" for lab in p.types]], rows)


def exp_stationary(run, cfg, threads):
    from .samplers import linnik_samples
    from .stats import McEstimate, compare, empirical_laplace
    p = model_of(cfg).require_ergodic()
    n = cfg["stationary.n"]
    eta = linnik_samples(RngStream(cfg["seed"]), p, n, threads=threads or 1)
    recs = []
    k = cfg["stationary.k_se"]
    for lam in cfg["stationary.lambdas"]:
        f = np.full(p.n_types, lam)
        est = empirical_laplace(eta, f)
        exact = math.exp(-A.stationary_log_laplace(p, f))
        c = compare(est, exact, k)
        recs.append(["laplace", lam, est.value, est.std_error, exact, c.passed])
        run.check(f"stationary Laplace lambda={lam:g}", c.passed, str(c))
    if p.is_unit():
        tot = eta.sum(axis=1)
        beta = p.alpha / 2
        est = McEstimate.from_samples(tot**beta)
        exact = A.moment_eta_total(p.alpha, p.mE, beta)
        c = compare(est, exact, k)
        recs.append(["moment", beta, est.value, est.std_error, exact, c.passed])
        run.check(f"moment of eta(E) at beta={beta:g}", c.passed, str(c))
        if p.mE > 1:
            w = A.importance_weight_constant(p.alpha, p.mE) * tot ** (-p.alpha)
            est = McEstimate.from_samples(w)
            c = compare(est, 1.0, k)
            recs.append(["importance_weight_mean", -p.alpha, est.value, est.std_error, 1.0, c.passed])
            run.check("importance weights have mean 1", c.passed, str(c))
    run.table("stationary.csv", ["quantity", "parameter", "estimate", "std_error", "exact", "pass"], recs)


def exp_verify_kernels(run, cfg, threads):
    from . import kernels as KV
    root = RngStream(cfg["seed"])
    spec = KV.GridSpec(cfg["kernels.n_points"], cfg["kernels.s_min"], cfg["kernels.s_max"])
    tol = cfg["kernels.psd_tol"]
    rows = []
    worst = math.inf
    neg_reverse = 0
    for i, al in enumerate(cfg["kernels.alphas"]):
        for gi in range(cfg["kernels.n_grids"]):
            pts = spec.draw(root.child(0).child(i).child(gi).fresh())
            ev = KV.gram_psd_test(KV.remainder_kernel, al, pts)
            rev = KV.gram_psd_test(lambda a, s, t: -KV.remainder_kernel(a, s, t), al, pts)
            neg_reverse += rev < 0
            worst = min(worst, ev)
            rows.append([al, gi, spec.n_points, ev, rev, ev >= -tol])
    run.table("gram.csv", ["alpha", "grid", "n_points", "min_eigenvalue",
                           "min_eigenvalue_reversed", "pass"], rows)
    run.check(f"Gram matrices of 2K~-J have min eigenvalue >= -{tol:g}", worst >= -tol,
              f"worst {worst:.3g}")
    run.note(f"J-2K~ has a negative eigenvalue on {neg_reverse} of {len(rows)} grids")

    n = cfg["kernels.n_random"]
    g = root.child(1).fresh()
    al = g.uniform(0.05, 0.95, n)
    s = np.exp(g.uniform(np.log(1e-3), np.log(50), n))
    t = np.exp(g.uniform(np.log(1e-3), np.log(50), n))
    d_k = np.max(np.abs([KV.kernel_K(a, x, y) / KV.kernel_K_explicit(a, x, y) - 1
                         for a, x, y in zip(al, s, t)]), initial=0.0)
    d_r = np.max([abs(KV.remainder_kernel(a, x, y, check=False) / KV.remainder_kernel_decomposed(a, x, y) - 1)
                  for a, x, y in zip(al, s, t)], initial=0.0)
    s2 = np.exp(g.uniform(np.log(0.1), np.log(50), n))
    t2 = np.exp(g.uniform(np.log(0.1), np.log(50), n))
    d_fd = np.max([abs(KV.finite_difference_Ktilde(a, x, y) / KV.kernel_Ktilde(a, x, y) - 1)
                   for a, x, y in zip(al, s2, t2)], initial=0.0)
    uv_viol = 0
    gam_best = 0.0
    for i in range(n):
        F = KV.random_exp_functional(g, 1)
        a = float(g.uniform(0.05, 0.95))
        U, V = KV.check_UV_inequality(a, F)
        uv_viol += 2 * V < U - 1e-10 * abs(U)
        if V > 0:
            gam_best = max(gam_best, U / V)
    p_viol = 0
    ratio = 0.0
    for i in range(n):
        pr = KV.random_params(g)
        F = KV.random_exp_functional(g, pr.n_types)
        var, bound = KV.check_poincare(pr, F)
        p_viol += var > bound + 1e-10
        if bound > 0:
            ratio = max(ratio, var / bound)
    checks = [
        ("two forms of K agree", d_k, 1e-12),
        ("analytic K~ matches finite differences", d_fd, 1e-5),
        ("remainder direct vs decomposition", d_r, 1e-10),
        ("2V(F) >= U(F) violations", uv_viol, 0),
        ("Poincare inequality violations", p_viol, 0),
    ]
    run.table("checks.csv", ["check", "value", "threshold", "pass"],
              [[nm, v, th, v <= th] for nm, v, th in checks])
    for nm, v, th in checks:
        run.check(nm, v <= th, f"{v:.3g} <= {th:.3g}")
    run.note(f"largest U/V over the panel (empirical best gamma): {gam_best:.6g}")
    run.note(f"largest var/bound over the Poincare panel: {ratio:.6g}")


def exp_verify_gap(run, cfg, threads):
    from .stats import GapTestConfig, gap_acceptance_test
    p = model_of(cfg)
    if p.n_types != 1:
        raise ConfigError("verify-gap needs a one-type model (constant coefficients)")
    gc = GapTestConfig(t_lo=cfg["gap.t_lo"], t_hi=cfg["gap.t_hi"], n_times=cfg["gap.n_times"],
                       n_outer=cfg["gap.n_outer"], n_immigration=cfg["gap.n_immigration"],
                       sim=sim_of(cfg), seed=cfg["seed"])
    rep = gap_acceptance_test(p.type_params(0), gc, RngStream(cfg["seed"]), threads)
    run.table("gap.csv", ["t", "closed_form_variance", "mc_variance", "mc_std_error"],
              zip(rep.times, rep.closed_variance, rep.mc_variance, rep.mc_variance_se))
    run.table("gap_summary.csv", ["quantity", "value", "std_error"],
              [["gap_exact", rep.gap_exact, 0.0], ["closed_form_slope", rep.closed_slope,
               rep.closed_half_width], ["mc_slope", rep.mc_slope, rep.mc_se], ["minus_b", -rep.b, 0.0]])
    for k, v in rep.checks.items():
        run.check(k, v)
    for ln in list(rep.lines())[:3]:
        run.note(ln)


def _gfv_inputs(cfg):
    p = model_of(cfg)
    R = p.n_types
    mu0 = np.asarray(cfg["gfv.mu0"] or np.full(R, 1.0 / R))
    f = np.asarray(cfg["gfv.f"] or np.eye(R)[0])
    return p, mu0, f


def exp_gfv(run, cfg, threads):
    from .gfv import GfvConfig, linear_moments, simulate_gfv_direct, simulate_gfv_timechange
    from .stats import McEstimate, compare, compare_two
    p, mu0, f = _gfv_inputs(cfg)
    root = RngStream(cfg["seed"])
    times = cfg["gfv.times"]
    gc = GfvConfig(cfg["gfv.epsilon"], max(times), cfg["gfv.n_paths"], cfg["seed"])
    routes = ("direct", "time-change") if cfg["gfv.route"] == "both" else (cfg["gfv.route"],)
    sim = sim_of(cfg, T=cfg["gfv.time_change_T"])
    res = {}
    if "direct" in routes:
        res["direct"] = simulate_gfv_direct(p, gc, mu0, root.child(0), times=times, threads=threads)
        run.check("renormalization corrections below 1e-6", res["direct"].max_renormalization < 1e-6,
                  f"{res['direct'].max_renormalization:.3g}")
    if "time-change" in routes:
        res["time-change"] = simulate_gfv_timechange(p, sim, gc, mu0, root.child(1), times=times,
                                                     threads=threads)
    k = cfg["gfv.k_se"]
    rows = []
    est = {}
    for route, paths in res.items():
        for s in times:
            x = paths.at(s) @ f
            mean, var = McEstimate.from_samples(x), McEstimate.variance_of(x)
            em, ev = linear_moments(p.alpha, p.m, mu0, f, s)
            if route == "direct":
                tm, tv = linear_moments(p.alpha, p.m, mu0, f, s, gc.epsilon)
                bm, bv = abs(tm - em), abs(tv - ev)
            else:
                bm = bv = cfg["gfv.bias_C"] * sim.bias_scale(p.alpha)
            est[route, s] = (mean, var, bm, bv)
            rows.append([route, s, mean.value, mean.std_error, var.value, var.std_error, em, ev, bm, bv])
            for nm, e, ex, b in (("mean", mean, em, bm), ("variance", var, ev, bv)):
                c = compare(e, ex, k, b)
                run.check(f"{route} {nm} at s={s:g} vs moment ODE", c.passed, str(c))
    run.table("gfv.csv", ["route", "s", "mean", "mean_std_error", "variance", "variance_std_error",
                          "exact_mean", "exact_variance", "mean_bias_budget", "variance_bias_budget"], rows)
    if len(res) == 2:
        for s in times:
            (m1, v1, bm1, bv1), (m2, v2, bm2, bv2) = est["direct", s], est["time-change", s]
            c = compare_two(m1, m2, k, bm1 + bm2)
            run.check(f"routes agree on mean at s={s:g}", c.passed, str(c))
            c = compare_two(v1, v2, k, bv1 + bv2)
            run.check(f"routes agree on variance at s={s:g}", c.passed, str(c))


PHIS = {
    "mu1": lambda mu: mu[..., 0],
    "mu1_squared": lambda mu: mu[..., 0] ** 2,
}


def decay_checks(curve, k=3.0, min_slope=-0.5):
    """(monotone, slope, slope_ok) for a DecayCurve."""
    from .stats import fit_decay_rate
    v, se, t = curve.variance, curve.std_error, curve.times
    mono = all(v[j + 1] <= v[j] + k * math.hypot(se[j], se[j + 1]) for j in range(v.size - 1))
    sel = (t >= t.max() / 10) & (t > 0)
    ok = sel & (v > 0)
    slope = math.nan
    if ok.sum() >= 4:
        wts = (v[ok] / np.maximum(se[ok], 1e-300)) ** 2
        slope = fit_decay_rate(np.log(t[ok]), np.log(v[ok]), wts).slope
    return mono, slope, bool(slope <= min_slope) if not math.isnan(slope) else False


def exp_gfv_decay(run, cfg, threads):
    from .gfv import GfvConfig, gfv_variance_decay, stationary_gfv_sample
    from .stats import McEstimate, compare_two
    p, _, _ = _gfv_inputs(cfg)
    phi = PHIS[cfg["gfv.phi"]]
    times = cfg["gfv.decay_times"]
    gc = GfvConfig(cfg["gfv.epsilon"], max(times), cfg["gfv.n_paths"], cfg["seed"])
    root = RngStream(cfg["seed"])
    curve = gfv_variance_decay(p, phi, gc, times, root.child(0), cfg["gfv.n_outer"],
                               cfg["gfv.n_inner"], threads)
    run.table("decay.csv", ["t", "variance", "std_error"], zip(curve.times, curve.variance, curve.std_error))
    mono, slope, ok = decay_checks(curve, cfg["gfv.k_se"], cfg["gfv.min_slope"])
    run.check("variance curve nonincreasing within error bars", mono)
    run.check(f"log-log slope over the last decade <= {cfg['gfv.min_slope']:g}", ok, f"slope {slope:.4g}")
    ws = stationary_gfv_sample(p, 64 * cfg["gfv.n_outer"], root.child(1))
    vals = phi(ws.points)
    w = ws.weights / ws.weights.sum()
    mean = w @ vals
    wv = float(w @ (vals - mean) ** 2)
    # delta-method SE of the self-normalized weighted variance
    infl = ws.weights * ((vals - mean) ** 2 - wv) / ws.weights.mean()
    ref = McEstimate(wv, float(infl.std(ddof=1) / math.sqrt(vals.size)), vals.size)
    v0 = McEstimate(float(curve.variance[0]), float(curve.std_error[0]), curve.n_outer)
    c = compare_two(v0, ref, cfg["gfv.k_se"])
    run.check("t=0 nested estimate matches the weighted-sample variance", c.passed, str(c))
    run.note(f"effective sample size of the stationary weights: {ws.ess:.1f} of {vals.size}")


RUNNERS = {
    "simulate": exp_simulate,
    "stationary": exp_stationary,
    "verify-kernels": exp_verify_kernels,
    "verify-gap": exp_verify_gap,
    "gfv": exp_gfv,
    "gfv-decay": exp_gfv_decay,
}


def _threads(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get(THREAD_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREAD_ENV} must be an integer, got {env!r}") from None
    return 1


def run(config_path=None, kind=None, seed=None, out=None, threads=None, stderr=None):
    """Execute one experiment; returns the process exit code."""
    stderr = stderr or sys.stderr
    try:
        cfg = load(config_path, kind, seed) if config_path else defaults(kind, seed)
        nthreads = _threads(threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return 2
    out_dir = Path(out) if out else Path("runs") / cfg.kind
    r = Run(cfg)
    try:
        RUNNERS[cfg.kind](r, cfg, nthreads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return 2
    except AlphaCirError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=stderr)
        return 2
    r.write(out_dir)
    print(r.report(), end="")
    return 0 if r.passed else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="alphacir", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"alphacir {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory (default runs/<experiment>)")
        sp.add_argument("--threads", type=int, help=f"worker threads (default ${THREAD_ENV} or 1)")

    for k in KINDS:
        sp = sub.add_parser(k, help=f"run the {k} experiment")
        sp.add_argument("--config", help="YAML experiment config")
        common(sp)
    sp = sub.add_parser("run", help="run the experiment named in a config file")
    sp.add_argument("config", help="YAML experiment config with an 'experiment' field")
    common(sp)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    kind = None if args.command == "run" else args.command
    return run(args.config, kind, args.seed, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
