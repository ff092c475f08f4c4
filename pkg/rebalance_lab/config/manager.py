"""Configuration loading for the laboratory."""

import dataclasses
import json
import logging
import os
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict

from ..core.errors import ConfigError
from .settings import (
    CacheConfig,
    CustomerConfig,
    LabSettings,
    ModelConfig,
    MpcConfig,
    RoutingConfig,
    SimConfig,
    SweepConfig,
    SyntheticSpec,
    parse_bool,
    parse_float,
)

logger = logging.getLogger(__name__)

SECTIONS = {
    "corpus": SyntheticSpec,
    "model": ModelConfig,
    "customer": CustomerConfig,
    "routing": RoutingConfig,
    "pricing": MpcConfig,
    "sim": SimConfig,
    "sweep": SweepConfig,
    "cache": CacheConfig,
}

PROJECT_INDICATORS = ("requirements.txt", "pyproject.toml", ".git", "main.py", "server.py")


class ConfigManager:
    """Loads a JSON (or TOML) settings document and builds ``LabSettings``."""

    def __init__(self, config_path: str = "config.json"):
        self.config_path = config_path
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        if not os.path.exists(self.config_path):
            logger.warning("Configuration file '%s' not found. Using defaults.", self.config_path)
            return {}

        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                config_text = self._expand_environment_variables(f.read())
            if self.config_path.endswith(".toml"):
                return tomllib.loads(config_text)
            return json.loads(config_text)
        except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"Error parsing config file '{self.config_path}': {e}") from e
        except OSError as e:
            raise ConfigError(f"Error loading config file '{self.config_path}': {e}") from e

    def _expand_environment_variables(self, text: str) -> str:
        """Replace ``${VAR}`` and ``${VAR:default}`` with environment values."""

        def replace_var(match):
            var_name = match.group(1)
            default_value = match.group(3) if match.group(3) else ""
            if var_name == "PROJECT_ROOT":
                return os.environ.get(var_name, self._get_project_root())
            return os.environ.get(var_name, default_value)

        pattern = r"\$\{([^}:]+)(:([^}]*))?\}"
        return re.sub(pattern, replace_var, text)

    def _get_project_root(self) -> str:
        current_dir = os.path.dirname(os.path.abspath(self.config_path))
        while current_dir != os.path.dirname(current_dir):
            for indicator in PROJECT_INDICATORS:
                if os.path.exists(os.path.join(current_dir, indicator)):
                    return current_dir
            current_dir = os.path.dirname(current_dir)
        return os.getcwd()

    def get_section(self, name: str) -> Dict[str, Any]:
        """Raw mapping of one section (empty when absent)."""
        section = self.config.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
        return section

    def get_settings(self) -> LabSettings:
        """Build and validate the typed settings tree."""
        unknown = set(self.config) - set(SECTIONS) - {"settings"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        built = {name: build_section(cls, self.get_section(name), name) for name, cls in SECTIONS.items()}
        log_level = self.get_section("settings").get("log_level", "INFO")
        return LabSettings(log_level=str(log_level), **built).validate()


def build_section(cls, values: Dict[str, Any], name: str = ""):
    """Instantiate a settings dataclass from a plain mapping, coercing types."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(values) - set(fields)
    if unknown:
        raise ConfigError(f"unknown keys in section '{name or cls.__name__}': {sorted(unknown)}")
    kwargs = {key: _coerce(fields[key], value, name) for key, value in values.items()}
    return cls(**kwargs)


def override(section, **flags):
    """Return ``section`` with every non-None flag applied (flags win)."""
    fields = {f.name: f for f in dataclasses.fields(section)}
    changes = {}
    for key, value in flags.items():
        if value is None:
            continue
        if key not in fields:
            raise ConfigError(f"unknown setting '{key}' for {type(section).__name__}")
        changes[key] = _coerce(fields[key], value, type(section).__name__)
    return dataclasses.replace(section, **changes)


def _coerce(f: dataclasses.Field, value, section: str):
    default = f.default if f.default is not dataclasses.MISSING else None
    try:
        if isinstance(default, bool):
            return parse_bool(value)
        if isinstance(default, float):
            return parse_float(value)
        if isinstance(default, int) and value is not None:
            return int(value)
        if isinstance(default, tuple):
            items = list(value) if isinstance(value, (list, tuple)) else [value]
            if default and isinstance(default[0], float):
                return tuple(parse_float(v) for v in items)
            if default and isinstance(default[0], int):
                return tuple(int(v) for v in items)
            return tuple(items)
    except (TypeError, ValueError, ConfigError) as exc:
        raise ConfigError(f"bad value for '{section}.{f.name}': {value!r}") from exc
    return value
