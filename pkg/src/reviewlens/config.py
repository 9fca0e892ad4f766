"""Layered runtime settings.

A reviewlens.toml file supplies per-module sections (backbone,
rasterize, service, train, cluster). Resolution order for any setting:
CLI flag > environment variable REVIEWLENS_<SECTION>_<KEY> > config
file > built-in default. The file is optional; an explicitly named one
must exist.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Callable, TypeVar

try:
    import tomllib  # noqa: F401  stdlib on 3.11+
except ModuleNotFoundError:  # pragma: no cover - interpreter-version dependent
    import tomli as tomllib  # type: ignore[no-redef]

from .errors import ConfigError

DEFAULT_CONFIG_FILENAME = "reviewlens.toml"
ENV_PREFIX = "REVIEWLENS"

T = TypeVar("T")


def load_config(path: str | Path | None = None) -> dict:
    """Parse a TOML config file into nested dicts.

    With no path, reads ./reviewlens.toml when present and returns {}
    otherwise; an explicit path that does not exist is an error.
    """
    if path is None:
        default = Path(DEFAULT_CONFIG_FILENAME)
        if not default.exists():
            return {}
        path = default
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fp:
            return tomllib.load(fp)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid config file {path}: {exc}") from exc


def resolve_setting(
    flag_value: T | None,
    config: dict,
    section: str,
    key: str,
    default: T | None = None,
    cast: Callable[[str], T] | None = None,
) -> T | None:
    """Apply the flag > env > file > default precedence for one setting."""
    if flag_value is not None:
        return flag_value
    env_name = f"{ENV_PREFIX}_{section.upper()}_{key.upper().replace('-', '_')}"
    raw = os.environ.get(env_name)
    if raw is not None:
        if cast is None:
            return raw  # type: ignore[return-value]
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"environment variable {env_name}={raw!r}: {exc}") from exc
    section_table = config.get(section)
    if isinstance(section_table, dict) and key in section_table:
        return section_table[key]
    return default
