"""
Dataclass <-> plain-dict conversion for YAML-backed configuration.
"""

import dataclasses
import typing
from typing import Any, Dict, Type, TypeVar

from .errors import ConfigError

T = TypeVar("T")


def config_from_dict(cls: Type[T], data: Dict[str, Any], where: str = "") -> T:
    """
    Build a (possibly nested) config dataclass from a mapping.

    Unknown keys raise ConfigError; missing keys keep their defaults.
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or cls.__name__}: expected a mapping, got {type(data).__name__}")

    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where or cls.__name__}: unknown keys {unknown}")

    hints = typing.get_type_hints(cls)
    kwargs = {}
    for name, value in data.items():
        hint = hints.get(name)
        if dataclasses.is_dataclass(hint):
            value = config_from_dict(hint, value, where=f"{where}.{name}" if where else name)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{where or cls.__name__}: {e}")


def config_to_dict(config: Any) -> Dict[str, Any]:
    """Plain nested dict (tuples become lists) for YAML/JSON output."""
    def convert(value):
        if isinstance(value, (list, tuple)):
            return [convert(v) for v in value]
        if isinstance(value, dict):
            return {k: convert(v) for k, v in value.items()}
        return value
    return convert(dataclasses.asdict(config))
