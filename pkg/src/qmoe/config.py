"""Key-value configuration files and option precedence for the CLI.

A config file holds "key = value" lines ('#' comments and blank lines
ignored); keys are the long option names with '-' or '_' interchangeable.
Effective settings resolve as: command-line flag over config-file value
over built-in default, and the resolved configuration is echoed to the log
so every artifact records its provenance.
"""

from __future__ import annotations

import logging
from pathlib import Path

from .errors import InputError

log = logging.getLogger("qmoe")


def read_config_file(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(key: str, raw: str, default):
    if default is None or isinstance(default, str):
        return raw
    if isinstance(default, bool):
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise InputError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise InputError(f"config key {key!r}: cannot parse {raw!r} as "
                         f"{type(default).__name__}") from None
    raise InputError(f"config key {key!r} has unsupported type")


def resolve_options(defaults: dict, file_values: dict[str, str],
                    cli_values: dict) -> dict:
    """Merge the three layers; unknown config-file keys are rejected so
    typos fail loudly."""
    unknown = set(file_values) - set(defaults)
    if unknown:
        raise InputError(f"unknown config file keys: {sorted(unknown)}")
    resolved = dict(defaults)
    for key, raw in file_values.items():
        resolved[key] = _coerce(key, raw, defaults[key])
    for key, value in cli_values.items():
        if key in resolved and value is not None:
            resolved[key] = value
    return resolved


def echo_options(command: str, options: dict) -> None:
    for key in sorted(options):
        log.info("config: %s.%s = %s", command, key, options[key])
