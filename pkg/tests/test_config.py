from pathlib import Path

import pytest
import yaml

from ifmeanfield.config import (PRESETS, ExperimentConfig, config_from_dict, config_to_dict, dump_config, load_config,
                                parse_config, preset)
from ifmeanfield.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_round_trip(name):
    cfg = preset(name)
    text = dump_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert dump_config(again) == text


def test_defaults_round_trip():
    cfg = ExperimentConfig()
    assert parse_config(dump_config(cfg)) == cfg
    assert parse_config("") == cfg


@pytest.mark.parametrize("name", ["example", "fig1", "fig2", "fig3"])
def test_shipped_files_parse(name):
    cfg = load_config(CONFIGS / f"{name}.yaml")
    if name != "example":
        assert cfg == preset(name)


def test_example_matches_full_preset():
    assert load_config(CONFIGS / "example.yaml") == preset("full")


def test_load_by_preset_name():
    assert load_config("fig2") == preset("fig2")
    with pytest.raises(ConfigError):
        load_config("no-such-file-or-preset")
    with pytest.raises(ConfigError):
        preset("nope")


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config("model: {lambda_hat: 1.0, lamda: 2}")
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config("extra: 1")


@pytest.mark.parametrize("text", [
    "seed: -1",
    "seed: 1.5",
    "model: {epsilon: -0.1}",
    "model: {delta: 1.5}",
    "sim: {interaction: fast}",
    "study: {kind: everything}",
    "study: {times: [5.0]}",
    "plot: yes please",
    "model: [1, 2]",
    "model: {lambda_hat: [1",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_integers_accepted_for_floats():
    cfg = parse_config("model: {lambda_hat: 2, horizon: 1}")
    assert isinstance(cfg.model.lambda_hat, float) and cfg.model.lambda_hat == 2.0


def test_dict_form_is_plain_yaml():
    d = config_to_dict(preset("fig3"))
    assert yaml.safe_load(yaml.safe_dump(d)) == d
    assert config_from_dict(d) == preset("fig3")


def test_sim_config_view():
    cfg = preset("fig2")
    sc = cfg.sim_config(n_particles=7, seed=3)
    assert sc.n_particles == 7 and sc.seed == 3 and sc.coeffs == cfg.model
    assert cfg.with_seed(11).seed == 11
