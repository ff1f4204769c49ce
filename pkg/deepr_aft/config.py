import json
import os

from deepr_aft.constants import DEFAULT_CONFIG
from deepr_aft.errors import ConfigError
from deepr_aft.experiment import ExperimentConfig, experiment_config_from_dict

CONFIG_FILE = os.path.expanduser("~/.deepr_aft_config.json")


def preferences_file() -> str:
    """Current location of the preferences file."""
    return CONFIG_FILE


def _read_json(path: str):
    with open(path, "r") as f:
        text = f.read()
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return data


def load_config(path: str = None) -> dict:
    """Loads user preferences from the config file.

    Missing keys are filled from ``DEFAULT_CONFIG``; a missing or empty file
    yields the defaults.

    Args:
        path (str): Config file to read. Defaults to ``~/.deepr_aft_config.json``.

    Returns:
        dict: Every key of ``DEFAULT_CONFIG``.

    Raises:
        ConfigError: If the file is not a JSON object or has unknown keys.
    """
    path = path or CONFIG_FILE
    config = dict(DEFAULT_CONFIG)
    if os.path.exists(path):
        stored = _read_json(path)
        unknown = sorted(set(stored) - set(DEFAULT_CONFIG))
        if unknown:
            raise ConfigError(f"unknown config key(s) in {path}: {', '.join(unknown)}")
        config.update(stored)
    return config


def save_config(config: dict, path: str = None):
    """Writes preferences to the config file as indented JSON."""
    with open(path or CONFIG_FILE, "w") as f:
        json.dump(config, f, indent=4)


def coerce_value(key: str, raw: str):
    """Converts a command-line string to the type of the key's default."""
    if key not in DEFAULT_CONFIG:
        raise ConfigError(f"unknown config key '{key}'")
    default = DEFAULT_CONFIG[key]
    try:
        if isinstance(default, bool):
            lowered = raw.strip().lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"'{raw}' is not a valid value for {key}") from exc
    return raw


def get_config_value(key: str, path: str = None):
    config = load_config(path)
    if key not in config:
        raise ConfigError(f"unknown config key '{key}'")
    return config[key]


def set_config_value(key: str, value, path: str = None):
    """Updates one preference and saves the file."""
    if key not in DEFAULT_CONFIG:
        raise ConfigError(f"unknown config key '{key}'")
    config = load_config(path)
    config[key] = value
    save_config(config, path)


def load_experiment_config(path: str) -> ExperimentConfig:
    """Reads a flat JSON experiment file; an empty file gives the default experiment."""
    if not os.path.exists(path):
        raise ConfigError(f"config file {path} does not exist")
    return experiment_config_from_dict(_read_json(path))


def save_experiment_config(config: ExperimentConfig, path: str):
    with open(path, "w") as f:
        json.dump(config.to_dict(), f, indent=4, sort_keys=True)
