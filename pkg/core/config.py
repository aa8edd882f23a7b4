from __future__ import annotations

import argparse
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import toml

from enf_tools.errors import InputError

# TOML table name -> CLI subcommand.
PRESET_TABLES = {
    "extract_audio": "extract-audio",
    "extract_video": "extract-video",
    "match": "match",
    "sweep": "sweep",
    "synth": "synth",
    "experiment": "experiment",
}
# Flags that only make sense per invocation.
_NOT_PRESETTABLE = {"config", "func", "command", "verbose", "quiet", "help"}


def load_presets(path: str | Path) -> dict[str, dict[str, Any]]:
    """Read a TOML preset file; each known table maps flag names (dashes or underscores) to values."""
    try:
        data = toml.load(path)
    except toml.TomlDecodeError as exc:
        raise InputError(f"{path}: invalid TOML: {exc}") from exc
    unknown = sorted(set(data) - set(PRESET_TABLES))
    if unknown:
        raise InputError(f"{path}: unknown preset table(s): {', '.join(unknown)}")
    presets: dict[str, dict[str, Any]] = {}
    for table, values in data.items():
        if not isinstance(values, dict):
            raise InputError(f"{path}: [{table}] must be a table")
        presets[PRESET_TABLES[table]] = {key.replace("-", "_"): value for key, value in values.items()}
    return presets


def apply_presets(subparsers: Mapping[str, argparse.ArgumentParser], presets: Mapping[str, Mapping[str, Any]]) -> None:
    """Install preset values as subcommand defaults so explicit flags still win."""
    for command, values in presets.items():
        parser = subparsers[command]
        known = {action.dest: action for action in parser._actions if action.dest not in _NOT_PRESETTABLE}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise InputError(f"[{command.replace('-', '_')}] has unknown key(s): {', '.join(unknown)}")
        converted: dict[str, Any] = {}
        for dest, value in values.items():
            action = known[dest]
            # Presets go through the same converters as command-line strings.
            if action.type is not None and not isinstance(value, bool):
                value = action.type(str(value)) if not isinstance(value, list) else [action.type(str(v)) for v in value]
            if action.choices is not None and value not in action.choices:
                raise InputError(f"[{command.replace('-', '_')}] {dest}={value!r} is not one of {sorted(action.choices, key=str)}")
            converted[dest] = value
        parser.set_defaults(**converted)
