import pytest

from fracphi import ConfigError
from fracphi import config


def test_defaults_and_load(tmp_path):
    cfg = config.load()
    assert cfg["params"]["alpha"] == 1.0
    p = tmp_path / "c.yaml"
    p.write_text("params: {alpha: 1.5}\npotential: {name: zero}\n")
    cfg = config.load(p)
    assert cfg["params"] == {"alpha": 1.5, "d": 1}
    assert cfg["potential"] == {"name": "zero"}
    assert cfg["grid"]["n"] == 1024


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        config.load(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        config.load(bad)
    broken = tmp_path / "broken.yaml"
    broken.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        config.load(broken)


def test_overrides():
    cfg = config.load()
    config.apply_override(cfg, "grid.n=2048")
    config.apply_override(cfg, "potential.delta=4")
    assert cfg["grid"]["n"] == 2048 and cfg["potential"]["delta"] == 4
    config.apply_override(cfg, "potential.name=well")
    assert cfg["potential"] == {"name": "well"}
    config.apply_override(cfg, "new.key=[1, 2]")
    assert cfg["new"]["key"] == [1, 2]
    with pytest.raises(ConfigError):
        config.apply_override(cfg, "grid.n")
    with pytest.raises(ConfigError):
        config.apply_override(cfg, "grid.n.x=1")


def test_validate_requires_seed_for_stochastic():
    cfg = config.load()
    with pytest.raises(ConfigError):
        config.validate(cfg, "fk")
    config.validate(cfg, "spectrum")
    cfg["mc"]["seed"] = 1
    config.validate(cfg, "paths")
    with pytest.raises(ConfigError):
        config.validate(cfg, "plot")


def test_digest_is_canonical():
    a = {"x": 1, "y": {"b": 2, "a": 1}}
    b = {"y": {"a": 1, "b": 2}, "x": 1}
    assert config.digest(a) == config.digest(b)
    assert config.digest(a) != config.digest({"x": 2, "y": {"b": 2, "a": 1}})


def test_exponent_floats_parse_as_numbers(tmp_path):
    cfg = config.load()
    config.apply_override(cfg, "mc.dt=1e-3")
    assert cfg["mc"]["dt"] == 0.001
    p = tmp_path / "c.yaml"
    p.write_text("mc: {dt: 5E-3}\n")
    assert config.load(p)["mc"]["dt"] == 0.005
