import numpy as np
import pytest

from fracctrl.scenario import SCHEMA, ConfigError, load_scenario, parse_scenario, shipped_scenario


def test_defaults_fill_every_key():
    scen = parse_scenario({})
    assert set(scen.config) == set(SCHEMA)
    for sec, keys in SCHEMA.items():
        assert set(scen.config[sec]) == set(keys)
    assert scen.model.alpha == 0.8
    assert scen.model.n_modes == 16
    np.testing.assert_allclose(scen.model.x_target, np.arange(1, 17.0) ** -3.0)


def test_shipped_scenario_loads():
    scen = shipped_scenario()
    assert scen.model.t_end == 0.5
    assert scen.seed == 2024
    assert scen.reg == 1e-6
    assert scen.source == "<shipped:neutral_heat>"


@pytest.mark.parametrize("raw", [
    {"modle": {}},
    {"model": {"alhpa": 0.8}},
    {"solver": {"seeds": 3}},
    {"model": 3},
])
def test_unknown_names_are_errors(raw):
    with pytest.raises(ConfigError):
        parse_scenario(raw)


@pytest.mark.parametrize("raw", [
    {"model": {"alpha": 0.4}},
    {"model": {"alpha": "x"}},
    {"control": {"reg": -1.0}},
    {"solver": {"n_paths": 0}},
    {"solver": {"workers": 0}},
    {"solver": {"tol": 0.0}},
    {"model": {"target": [1.0, 2.0]}},
])
def test_invalid_values_are_errors(raw):
    with pytest.raises(ConfigError):
        parse_scenario(raw)


def test_config_hash_is_stable_and_sensitive():
    a, b = shipped_scenario(), shipped_scenario()
    assert a.config_hash() == b.config_hash()
    assert len(a.config_hash()) == 64
    assert a.replace(solver={"seed": 1}).config_hash() != a.config_hash()
    # spelling a default explicitly does not change the resolved configuration
    assert parse_scenario({}).config_hash() == parse_scenario({"model": {"alpha": 0.8}}).config_hash()


def test_replace():
    scen = shipped_scenario().replace(model={"t_end": 0.1}, control={"reg": 1e-4})
    assert scen.model.t_end == 0.1 and scen.reg == 1e-4
    assert scen.model.alpha == 0.8
    with pytest.raises(ConfigError):
        shipped_scenario().replace(bogus={})


def test_load_from_file(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text("[model]\nt_end = 0.25\n[operator]\nn_modes = 4\n")
    scen = load_scenario(p)
    assert scen.model.t_end == 0.25 and scen.model.n_modes == 4
    assert scen.source == str(p)
    (tmp_path / "bad.toml").write_text("[model\n")
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "bad.toml")
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.toml")
