"""Measure-valued alpha-CIR model on a finite type space.

The Laplace functional factorizes over types, so the model is simulated as
independent one-dimensional engines, type r drawing from ``stream.child(r)``.
"""
from __future__ import annotations

import numpy as np

from .cir import PathRecord, SimConfig, simulate_paths
from .errors import ParameterError
from .model import ModelParams, measure_state
from .rng import as_stream


def functional(eta, f):
    """<eta, f> = sum_r f(r) eta(r); eta may carry leading batch axes."""
    eta = np.asarray(eta, dtype=float)
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or eta.shape[-1] != f.size:
        raise ParameterError(f"dimension mismatch: eta has {eta.shape[-1]} types, f has {f.size}")
    out = eta @ f
    return float(out) if out.ndim == 0 else out


def simulate_measure_path(params: ModelParams, config: SimConfig, eta0, rng=None,
                          record_times=None, threads=None):
    """Joint paths of all types; ``states`` has shape (n_times, n_paths, R).

    ``eta0`` is a length-R vector shared by all paths or an (n_paths, R)
    array of starting states.
    """
    stream = as_stream(rng, config.seed)
    R = params.n_types
    eta0 = np.asarray(eta0, dtype=float)
    if eta0.shape[-1] != R:
        raise ParameterError("eta0 has the wrong number of types")
    measure_state(eta0.ravel())
    eta0 = np.broadcast_to(eta0, (config.n_paths, R))
    recs = [simulate_paths(params.type_params(r), config, eta0[:, r], stream.child(r),
                           record_times=record_times, threads=threads)
            for r in range(R)]
    states = np.stack([rc.states for rc in recs], axis=-1)
    tot = PathRecord(recs[0].times, states)
    for rc in recs:
        tot.branch_jumps += rc.branch_jumps
        tot.immigration_jumps += rc.immigration_jumps
        tot.clamps += rc.clamps
        tot.stable_steps += rc.stable_steps
        tot.steps += rc.steps
    return tot
