import pytest
import yaml

from alphacir.config import KINDS, SCHEMA, defaults, load
from alphacir.errors import ConfigError


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_for_every_kind():
    for k in KINDS:
        cfg = defaults(k)
        assert cfg.kind == k and cfg["seed"] == 0
        yaml.safe_load(cfg.resolved_yaml())
    assert defaults("gfv")["model.m"] == [1.2, 1.2]


def test_load_and_override(tmp_path):
    p = write(tmp_path, "experiment: simulate\nseed: 4\nmodel:\n  alpha: 0.3\n  m: [1, 2]\nsim:\n  h: 1e-3\n")
    cfg = load(p)
    assert cfg.kind == "simulate" and cfg["seed"] == 4
    assert cfg["model.alpha"] == 0.3 and cfg["model.m"] == [1.0, 2.0] and cfg["sim.h"] == 1e-3
    assert load(p, seed=9)["seed"] == 9
    assert "alpha: 0.3" in cfg.resolved_yaml() and "gap" not in cfg.resolved_yaml()


@pytest.mark.parametrize("text, needle", [
    ("experiment: simulate\nmodel:\n  alpha: 1.5\n", ":3: field 'model.alpha' = 1.5 must lie in (0,1)"),
    ("experiment: simulate\nsim:\n  h: fast\n", ":3: field 'sim.h': expected number"),
    ("experiment: simulate\nsim:\n  bogus: 1\n", ":3: field 'sim.bogus': unknown field"),
    ("experiment: simulate\nnope:\n  x: 1\n", "unknown section 'nope'"),
    ("experiment: other\n", "field 'experiment'"),
    ("model:\n  alpha: 0.5\n", "missing field 'experiment'"),
    ("experiment: simulate\nmodel:\n  a: [1, 2]\n  b: [1, 2, 3]\n", "does not match"),
    ("experiment: gfv\ngfv:\n  mu0: [0.5, 0.6]\n", "must sum to 1"),
    ("experiment: simulate\nsimulate:\n  record_times: [3.0]\n", "exceeds sim.T"),
    ("experiment: simulate\nsim: [1\n", "malformed YAML"),
    ("experiment: gfv\ngfv:\n  epsilon: 0\n", "'gfv.epsilon' = 0.0 must lie in (0,1)"),
])
def test_errors_name_field_and_line(tmp_path, text, needle):
    p = write(tmp_path, text)
    with pytest.raises(ConfigError) as e:
        load(p)
    assert needle in str(e.value)


def test_command_kind_must_match(tmp_path):
    p = write(tmp_path, "experiment: simulate\n")
    with pytest.raises(ConfigError):
        load(p, kind="gfv")
    assert load(p, kind="simulate").kind == "simulate"
    assert load(write(tmp_path, "seed: 1\n", "d.yaml"), kind="gfv").kind == "gfv"


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "absent.yaml")


def test_schema_keys_are_sectioned():
    for k in SCHEMA:
        assert k in ("experiment", "seed") or k.count(".") == 1
