"""TOML config loading and flag merging for the CLI.

A config file holds one table per subcommand plus shared top-level keys
(``seed``, ``jobs``); explicit command-line flags always win::

    seed = 7
    [poison]
    dataset = "data/annotations.json"
    goal = "TMA"
    target_label = 0
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import FormatError

SHARED_KEYS = ("seed", "jobs")


def load_config(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(f"malformed TOML in {path}: {exc}") from exc


def effective_options(
    config_path: Optional[str],
    section: str,
    cli_values: dict[str, Any],
) -> dict[str, Any]:
    """Layer config-file values under the explicitly-set CLI flags."""
    merged: dict[str, Any] = {}
    if config_path:
        doc = load_config(config_path)
        for key in SHARED_KEYS:
            if key in doc:
                merged[key] = doc[key]
        table = doc.get(section, {})
        if not isinstance(table, dict):
            raise FormatError(f"config section [{section}] must be a table")
        merged.update(table)
    for key, value in cli_values.items():
        if value is not None:
            merged[key] = value
    return merged
