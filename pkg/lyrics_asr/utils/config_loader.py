"""Hierarchical YAML configuration with dotted-key overrides."""

import copy
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Type, TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from lyrics_asr.exceptions import ConfigError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """
    Load a YAML configuration file.

    Args:
        path: Path to the YAML file (None gives an empty config)

    Returns:
        Nested dictionary of configuration values
    """
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {config_path}")
    try:
        loaded = yaml.safe_load(config_path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {config_path}: {e}") from e
    if not isinstance(loaded, dict):
        raise ConfigError(f"Top level of {config_path} must be a mapping")
    logger.debug(f"Loaded config from {config_path}")
    return loaded


def parse_override(item: str) -> tuple:
    """Split ``section.key=value`` into (dotted key, parsed value)."""
    if "=" not in item:
        raise ConfigError(f"Override must look like key=value, got: {item}")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"Empty key in override: {item}")
    # YAML scalar parsing gives ints, floats, bools and lists for free
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError:
        value = raw
    return key, value


def set_dotted(config: Dict[str, Any], key: str, value: Any) -> None:
    """Set a nested value addressed by a dotted key."""
    parts = key.split(".")
    node = config
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = {}
            node[part] = child
        elif not isinstance(child, dict):
            raise ConfigError(f"Cannot descend into non-mapping key '{part}' of '{key}'")
        node = child
    node[parts[-1]] = value


def get_dotted(config: Dict[str, Any], key: str, default: Any = None) -> Any:
    """Read a nested value addressed by a dotted key."""
    node: Any = config
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def merge_config(
    base: Dict[str, Any],
    file_config: Dict[str, Any],
    overrides: Iterable[str] = (),
    flags: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Merge configuration layers.

    Precedence: base < file < ``--set`` overrides < dedicated CLI flags.

    Args:
        base: Preset defaults
        file_config: Values loaded from YAML
        overrides: ``key=value`` strings
        flags: Dotted keys set by dedicated flags (None values are ignored)

    Returns:
        Merged nested dictionary
    """
    merged = copy.deepcopy(base)
    _deep_update(merged, file_config)
    for item in overrides:
        key, value = parse_override(item)
        set_dotted(merged, key, value)
    for key, value in (flags or {}).items():
        if value is not None:
            set_dotted(merged, key, value)
    return merged


def _deep_update(target: Dict[str, Any], source: Dict[str, Any]) -> None:
    for key, value in source.items():
        if isinstance(value, dict) and isinstance(target.get(key), dict):
            _deep_update(target[key], value)
        else:
            target[key] = copy.deepcopy(value)


def validate_config(model_cls: Type[ModelT], data: Dict[str, Any]) -> ModelT:
    """Build a pydantic config, turning validation failures into ConfigError."""
    try:
        return model_cls.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid {model_cls.__name__}: {e}") from e
