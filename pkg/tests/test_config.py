import json
from unittest.mock import patch

import pytest

from deepr_aft.config import (
    coerce_value, get_config_value, load_config, load_experiment_config, preferences_file,
    save_config, save_experiment_config, set_config_value,
)
from deepr_aft.constants import DEFAULT_CONFIG
from deepr_aft.errors import ConfigError
from deepr_aft.experiment import ExperimentConfig


# Fixture pointing CONFIG_FILE at a temporary file for each test
@pytest.fixture
def temp_config_file(tmp_path):
    config_path = tmp_path / ".deepr_aft_config.json"
    with patch("deepr_aft.config.CONFIG_FILE", new=str(config_path)):
        yield config_path


def test_preferences_file_follows_patch(temp_config_file):
    assert preferences_file() == str(temp_config_file)


def test_load_config_no_file(temp_config_file):
    assert load_config() == DEFAULT_CONFIG


def test_load_config_empty_file(temp_config_file):
    temp_config_file.write_text("")
    assert load_config() == DEFAULT_CONFIG


def test_load_config_malformed_json(temp_config_file):
    temp_config_file.write_text('{"seed": ')
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config()


def test_load_config_not_an_object(temp_config_file):
    temp_config_file.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config()


def test_load_config_fills_missing_keys(temp_config_file):
    temp_config_file.write_text(json.dumps({"seed": 42}))
    config = load_config()
    assert config["seed"] == 42
    assert config["output_format"] == "csv"


def test_load_config_unknown_key(temp_config_file):
    temp_config_file.write_text(json.dumps({"units": "metric"}))
    with pytest.raises(ConfigError, match="units"):
        load_config()


def test_save_config(temp_config_file):
    config = dict(DEFAULT_CONFIG, replicates=5)
    save_config(config)
    assert json.loads(temp_config_file.read_text()) == config


def test_set_and_get_config_value(temp_config_file):
    set_config_value("centering", "kaplan_meier")
    assert get_config_value("centering") == "kaplan_meier"
    assert get_config_value("seed") == 0


def test_set_config_value_unknown_key(temp_config_file):
    with pytest.raises(ConfigError):
        set_config_value("favorites", "home")


def test_coerce_value():
    assert coerce_value("seed", "12") == 12
    assert coerce_value("output_format", "text") == "text"
    with pytest.raises(ConfigError):
        coerce_value("replicates", "many")
    with pytest.raises(ConfigError):
        coerce_value("colour", "red")


def test_experiment_config_round_trip(tmp_path):
    path = tmp_path / "experiment.json"
    config = ExperimentConfig(mean_kind="gam", tau=60.0, methods=("deepr_aft", "saft"), epochs=10)
    save_experiment_config(config, path)
    assert load_experiment_config(path) == config


def test_experiment_config_empty_file(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text("")
    assert load_experiment_config(path) == ExperimentConfig()


def test_experiment_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_experiment_config(tmp_path / "nope.json")


def test_experiment_config_unknown_key(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({"mean_kind": "gam", "learning_rat": 0.1}))
    with pytest.raises(ConfigError, match="learning_rat"):
        load_experiment_config(path)
