"""Strict dataclass <-> JSON mapping used by every config type."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing


class ConfigError(ValueError):
    """Invalid configuration. ``field`` names the offending key path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def json_key(f: dataclasses.Field) -> str:
    return f.metadata.get("key", f.name)


def _coerce(value, tp, path: str):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, path)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path)
    if origin is typing.Literal:
        if value not in typing.get_args(tp):
            raise ConfigError(path, f"expected one of {list(typing.get_args(tp))}, got {value!r}")
        return value
    return value


def from_dict(cls, data, path: str = ""):
    """Build dataclass ``cls`` from a mapping, rejecting unknown keys.

    Validation errors raised by ``__post_init__`` as ``ValueError`` are
    re-raised as :class:`ConfigError` carrying the key path.
    """
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    fields = {json_key(f): f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(where, "unknown field")
    kwargs = {}
    for key, f in fields.items():
        if key in data:
            sub = f"{path}.{key}" if path else key
            kwargs[f.name] = _coerce(data[key], hints[f.name], sub)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        if path and not exc.field.startswith(path):
            raise ConfigError(f"{path}.{exc.field}", str(exc).split(": ", 1)[-1]) from None
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(path or cls.__name__, str(exc)) from None


def to_dict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        out[json_key(f)] = to_dict(value) if dataclasses.is_dataclass(value) else value
    return out


def require(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ConfigError(field, message)


def config_hash(obj) -> str:
    blob = json.dumps(to_dict(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
