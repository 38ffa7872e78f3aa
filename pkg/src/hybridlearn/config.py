"""Flat ``key = value`` config files shared by every stage."""

from __future__ import annotations

import os


class ConfigError(ValueError):
    pass


def parse_kv(text: str, source: str = "<string>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def read_kv(path) -> dict[str, str]:
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_kv(text, path)


def write_kv(path, values: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in values.items():
            fh.write(f"{key} = {value}\n")


def shipped_path(name: str) -> str:
    """Filesystem path of a config file bundled in ``hybridlearn/data``."""
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", name)


def take(values: dict[str, str], key: str, conv=str, source: str = "config"):
    try:
        raw = values.pop(key)
    except KeyError:
        raise ConfigError(f"{source}: missing key {key!r}") from None
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"{source}: bad value for {key!r}: {raw!r} ({exc})") from None
