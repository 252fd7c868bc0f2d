import os
from typing import Any, Dict, Mapping, Optional

import yaml
from humps import decamelize, dekebabize

from adaptive_docmt.utils.app_exception import ConfigurationError
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

ENV_PREFIX = "DOCMT_"


def normalize_key(key: str) -> str:
    """Map `noDiv`, `no-div` and `no_div` onto the same snake case key."""
    return dekebabize(decamelize(key.strip())).lower()


def convert_value(value: Any, default: Any = None) -> Any:
    """
    Convert a textual value to the type implied by its default.

    Untyped values fall back to int, then float, then the raw string.
    """
    if not isinstance(value, str):
        return value
    if isinstance(default, bool):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ConfigurationError(f"expected a boolean, got '{value}'")
    if isinstance(default, int):
        try:
            return int(value)
        except ValueError:
            raise ConfigurationError(f"expected an integer, got '{value}'")
    if isinstance(default, float):
        try:
            return float(value)
        except ValueError:
            raise ConfigurationError(f"expected a number, got '{value}'")
    if isinstance(default, (list, tuple)):
        return [convert_value(item.strip(), default[0] if default else None)
                for item in value.split(",") if item.strip()]
    if default is not None:
        return value
    try:
        return int(value)
    except ValueError:
        try:
            return float(value)
        except ValueError:
            return value


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Load a flat key-value YAML configuration file.

    Parameters:
    - path (str): the configuration file.

    Returns:
    - dict: normalised keys to values.
    """
    with open(path, "r", encoding="utf-8") as file:
        data = yaml.safe_load(file)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must contain a key-value mapping")

    result = {}
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigurationError(f"config key '{key}' must not be nested")
        result[normalize_key(str(key))] = value
    log.debug(f"config file {path}: {result}")
    return result


def env_values(env: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    env = os.environ if env is None else env
    return {
        normalize_key(name[len(ENV_PREFIX):]): value
        for name, value in env.items()
        if name.startswith(ENV_PREFIX)
    }


def resolve_config(
    defaults: Dict[str, Any],
    file_values: Optional[Dict[str, Any]] = None,
    env: Optional[Dict[str, Any]] = None,
    flags: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Merge configuration layers with precedence flag > env > file > default.

    Flags whose value is None were not given on the command line and do not
    override lower layers. Unknown keys are rejected.
    """
    resolved = dict(defaults)
    for source, layer in (("file", file_values), ("env", env), ("flag", flags)):
        for key, value in (layer or {}).items():
            key = normalize_key(key)
            if key not in defaults:
                if source == "env":
                    continue
                raise ConfigurationError(f"unknown {source} config key '{key}'")
            if value is None:
                continue
            resolved[key] = convert_value(value, defaults[key])
    return resolved
