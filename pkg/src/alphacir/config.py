"""Experiment configuration: YAML files validated against a fixed schema.

Errors name the offending field and, when it came from a file, its line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .cir import WEAK_ERROR_C
from .errors import ConfigError

KINDS = ("simulate", "stationary", "verify-kernels", "verify-gap", "gfv", "gfv-decay")


def _num(v):
    # YAML 1.1 reads 1e-3 as a string; accept it as a number
    if isinstance(v, bool):
        raise TypeError
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        return float(v)
    raise TypeError


def _int(v):
    if isinstance(v, bool):
        raise TypeError
    if isinstance(v, int):
        return v
    f = _num(v)
    if f != int(f):
        raise TypeError
    return int(f)


def _nums(v):
    if not isinstance(v, (list, tuple)):
        v = [v]
    return [_num(x) for x in v]


def _str(v):
    if not isinstance(v, str):
        raise TypeError
    return v


def _strs(v):
    if not isinstance(v, (list, tuple)):
        raise TypeError
    return [_str(x) for x in v]


def _bool(v):
    if not isinstance(v, bool):
        raise TypeError
    return v


def _any(v):
    return v


# field -> (converter, type description, range check or None, default)
def _gt0(x):
    return x > 0


def _ge0(x):
    return x >= 0


def _all(pred):
    return lambda xs: all(pred(x) for x in xs)


SCHEMA = {
    "experiment": (_str, "string", lambda s: s in KINDS, None),
    "seed": (_int, "integer", lambda s: 0 <= s < 2**64, 0),
    "model.alpha": (_num, "number", lambda a: 0 < a < 1, 0.5),
    "model.a": (_nums, "number list", _all(_gt0), [1.0]),
    "model.b": (_nums, "number list", None, [1.0]),
    "model.m": (_nums, "number list", _all(_ge0), [1.0]),
    "model.types": (_strs, "string list", None, None),
    "sim.h": (_num, "number", _gt0, 1e-3),
    "sim.delta_B": (_num, "number", _gt0, 1e-3),
    "sim.delta_I": (_num, "number", _gt0, 1e-3),
    "sim.T": (_num, "number", _ge0, 2.0),
    "sim.n_paths": (_int, "integer", lambda n: n >= 1, 1000),
    "sim.small_jumps": (_str, "string", lambda s: s in ("gaussian", "drop"), "gaussian"),
    "sim.max_jumps_per_step": (_num, "number", _gt0, 256.0),
    "gfv.epsilon": (_num, "number", lambda e: 0 < e < 1, 1e-3),
    "gfv.horizon": (_num, "number", _ge0, 1.0),
    "gfv.n_paths": (_int, "integer", lambda n: n >= 1, 1000),
    "gfv.route": (_str, "string", lambda s: s in ("direct", "time-change", "both"), "both"),
    "gfv.mu0": (_nums, "number list", _all(_ge0), None),
    "gfv.times": (_nums, "number list", _all(_ge0), [0.5, 1.0]),
    "gfv.decay_times": (_nums, "number list", _all(_ge0), [0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0]),
    "gfv.bias_C": (_num, "number", _ge0, WEAK_ERROR_C),
    "gfv.f": (_nums, "number list", None, None),
    "gfv.time_change_T": (_num, "number", _gt0, 200.0),
    "gfv.n_outer": (_int, "integer", lambda n: n >= 2, 256),
    "gfv.n_inner": (_int, "integer", lambda n: n >= 2, 256),
    "gfv.phi": (_str, "string", lambda s: s in ("mu1", "mu1_squared"), "mu1_squared"),
    "gfv.min_slope": (_num, "number", None, -0.5),
    "gfv.k_se": (_num, "number", _ge0, 3.0),
    "simulate.eta0": (_nums, "number list", _all(_ge0), None),
    "simulate.record_times": (_nums, "number list", _all(_ge0), [0.5, 1.0, 2.0]),
    "simulate.lambdas": (_nums, "number list", _all(_gt0), [0.5, 1.0, 2.0]),
    "simulate.export_paths": (_int, "integer", _ge0, 10),
    "simulate.k_se": (_num, "number", _ge0, 3.0),
    "simulate.bias_C": (_num, "number", _ge0, WEAK_ERROR_C),
    "stationary.n": (_int, "integer", lambda n: n >= 2, 100000),
    "stationary.lambdas": (_nums, "number list", _all(_gt0), [0.5, 1.0, 2.0]),
    "stationary.k_se": (_num, "number", _ge0, 3.0),
    "kernels.alphas": (_nums, "number list", _all(lambda a: 0 < a < 1),
                       [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]),
    "kernels.n_grids": (_int, "integer", lambda n: n >= 1, 20),
    "kernels.n_points": (_int, "integer", lambda n: 1 <= n <= 64, 32),
    "kernels.s_min": (_num, "number", _gt0, 1e-3),
    "kernels.s_max": (_num, "number", _gt0, 50.0),
    "kernels.n_random": (_int, "integer", _ge0, 1000),
    "kernels.psd_tol": (_num, "number", _ge0, 1e-8),
    "gap.n_outer": (_int, "integer", lambda n: n >= 2, 4096),
    "gap.n_immigration": (_int, "integer", lambda n: n >= 2, 4096),
    "gap.t_lo": (_num, "number", _gt0, 5.0),
    "gap.t_hi": (_num, "number", _gt0, 15.0),
    "gap.n_times": (_int, "integer", lambda n: n >= 4, 11),
}

SECTIONS = sorted({k.split(".")[0] for k in SCHEMA if "." in k})


# Fleming-Viot experiments are trivial with one type.
KIND_DEFAULTS = {
    "gfv": {"model.m": [1.2, 1.2]},
    "gfv-decay": {"model.m": [1.2, 1.2]},
}

USES = {
    "simulate": ("model", "sim", "simulate"),
    "stationary": ("model", "stationary"),
    "verify-kernels": ("kernels",),
    "verify-gap": ("model", "sim", "gap"),
    "gfv": ("model", "sim", "gfv"),
    "gfv-decay": ("model", "gfv"),
}


@dataclass
class ExperimentConfig:
    kind: str
    values: dict
    source: str = "<defaults>"
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def resolved_yaml(self):
        """YAML dump of the fields the experiment reads."""
        nested = {}
        keep = USES[self.kind]
        for k in sorted(self.values):
            v = self.values[k]
            head, _, tail = k.partition(".")
            if v is None or (tail and head not in keep):
                continue
            if tail:
                nested.setdefault(head, {})[tail] = v
            else:
                nested[head] = v
        return yaml.safe_dump(nested, sort_keys=True, default_flow_style=None, width=100)


def _line_map(node, prefix="", out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = f"{prefix}.{k.value}" if prefix else str(k.value)
            out[key] = k.start_mark.line + 1
            _line_map(v, key, out)
    return out


def _flatten(doc, where):
    flat = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: top level must be a mapping")
    for k, v in doc.items():
        if isinstance(v, dict):
            if k not in SECTIONS:
                raise ConfigError(f"{where}: unknown section '{k}'")
            for kk, vv in v.items():
                flat[f"{k}.{kk}"] = vv
        else:
            flat[str(k)] = v
    return flat


def _describe(key, lines, source):
    ln = lines.get(key)
    return f"{source}:{ln}: field '{key}'" if ln else f"field '{key}'"


RANGE_TEXT = {
    "model.alpha": "must lie in (0,1)",
    "gfv.epsilon": "must lie in (0,1)",
    "kernels.alphas": "entries must lie in (0,1)",
    "model.a": "entries must be > 0",
    "model.m": "entries must be >= 0",
}


def build(kind, raw: dict, source="<defaults>", lines=None, seed=None):
    lines = lines or {}
    raw = dict(raw)
    file_kind = raw.pop("experiment", None)
    if file_kind is not None and kind is not None and file_kind != kind:
        raise ConfigError(f"{_describe('experiment', lines, source)}: file declares "
                          f"'{file_kind}' but the command is '{kind}'")
    kind = kind or file_kind
    if kind is None:
        raise ConfigError(f"{source}: missing field 'experiment' (one of {', '.join(KINDS)})")
    if kind not in KINDS:
        raise ConfigError(f"{_describe('experiment', lines, source)}: must be one of {KINDS}")
    vals = {}
    for key, (conv, tdesc, check, default) in SCHEMA.items():
        if key == "experiment":
            continue
        if key in raw:
            v = raw.pop(key)
            try:
                v = conv(v)
            except (TypeError, ValueError):
                raise ConfigError(f"{_describe(key, lines, source)}: expected {tdesc}, got {v!r}") from None
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(f"{_describe(key, lines, source)}: must be finite")
            if check is not None and not check(v):
                msg = RANGE_TEXT.get(key, "is out of range")
                raise ConfigError(f"{_describe(key, lines, source)} = {v!r} {msg}")
        else:
            v = KIND_DEFAULTS.get(kind, {}).get(key, default)
        vals[key] = v
    if raw:
        k = sorted(raw)[0]
        raise ConfigError(f"{_describe(k, lines, source)}: unknown field")
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        vals["seed"] = int(seed)
    _cross_checks(vals, lines, source)
    return ExperimentConfig(kind, vals, source, lines)


def _cross_checks(v, lines, source):
    n = max(len(v["model.a"]), len(v["model.b"]), len(v["model.m"]))
    for k in ("model.a", "model.b", "model.m"):
        if len(v[k]) not in (1, n):
            raise ConfigError(f"{_describe(k, lines, source)}: length {len(v[k])} does not match "
                              f"the {n} types")
    if sum(v["model.m"]) * (n if len(v["model.m"]) == 1 else 1) <= 0:
        raise ConfigError(f"{_describe('model.m', lines, source)}: m(E) must be > 0")
    if v["model.types"] is not None and len(v["model.types"]) != n:
        raise ConfigError(f"{_describe('model.types', lines, source)}: needs {n} labels")
    for k in ("simulate.eta0", "gfv.mu0", "gfv.f"):
        if v[k] is not None and len(v[k]) != n:
            raise ConfigError(f"{_describe(k, lines, source)}: needs {n} entries")
    if v["gfv.mu0"] is not None and abs(sum(v["gfv.mu0"]) - 1.0) > 1e-9:
        raise ConfigError(f"{_describe('gfv.mu0', lines, source)}: weights must sum to 1")
    if v["kernels.s_min"] >= v["kernels.s_max"]:
        raise ConfigError(f"{_describe('kernels.s_min', lines, source)}: must be below kernels.s_max")
    if v["gap.t_lo"] >= v["gap.t_hi"]:
        raise ConfigError(f"{_describe('gap.t_lo', lines, source)}: must be below gap.t_hi")
    T = v["sim.T"]
    h = v["sim.h"]
    for k in ("simulate.record_times",):
        for t in v[k]:
            if t > T + 1e-12:
                raise ConfigError(f"{_describe(k, lines, source)}: time {t} exceeds sim.T={T}")
            if abs(t / h - round(t / h)) > 1e-9 * max(1.0, t / h):
                raise ConfigError(f"{_describe(k, lines, source)}: time {t} is not a multiple of sim.h")
    if abs(T / h - round(T / h)) > 1e-9 * max(1.0, T / h):
        raise ConfigError(f"{_describe('sim.T', lines, source)}: must be a multiple of sim.h")


def load(path, kind=None, seed=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        node = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError(f"{where}: malformed YAML ({getattr(exc, 'problem', exc)})") from None
    doc = {} if doc is None else doc
    lines = _line_map(node) if node is not None else {}
    return build(kind, _flatten(doc, path), str(path), lines, seed)


def defaults(kind, seed=None):
    return build(kind, {}, seed=seed)
