"""
Module/Script Name: config_store.py
Path: fedpoison/config_store.py

Description:
Experiment config loading, validation and saving.

Provides:
- Strict parsing of flat dotted `key = value` files (the default format)
- Parsing of nested YAML files through the same validation
- Canonical config hashing for output file names
- Flat dumps of resolved configs, written next to each run CSV

Author(s):
fedpoison maintainers

Created Date:
2026-10-19

Last Modified Date:
2026-10-19

Version:
v1.0.0

Comments:
- v1.0.0: Initial implementation
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from typing import Any, Dict, List

import yaml
from pydantic import ValidationError

from .config_schema import ExperimentConfig, set_dotted
from .errors import ConfigError
from .utils import ensure_dir_exists, load_yaml, parse_scalar, save_yaml

_KEY_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*")


def parse_flat_text(text: str, source: str = "<string>") -> Dict[str, Any]:
    """
    Parse flat `key = value` text into a nested dictionary.

    Blank lines and lines starting with '#' are ignored. Values are parsed as
    YAML scalars or flow collections, so `[32, 16]`, `true` and `1e-3` keep
    their types.

    Raises:
        ConfigError: On malformed lines, bad keys or repeated keys
    """
    data: Dict[str, Any] = {}
    seen: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}:{lineno}: expected 'key = value', got '{line}'",
                {"line": lineno},
            )
        key, _, value_text = line.partition("=")
        key = key.strip()
        if not _KEY_PATTERN.fullmatch(key):
            raise ConfigError(f"{source}:{lineno}: malformed key '{key}'", {"line": lineno})
        if key in seen:
            raise ConfigError(
                f"{source}:{lineno}: duplicate key '{key}' (first set on line {seen[key]})",
                {"key": key, "line": lineno},
            )
        seen[key] = lineno
        try:
            value = parse_scalar(value_text.strip())
        except yaml.YAMLError as e:
            raise ConfigError(
                f"{source}:{lineno}: cannot parse value for '{key}': {e}", {"key": key}
            ) from e
        try:
            set_dotted(data, key, value)
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: {e}", {"key": key}) from e
    return data


def _describe(error: ValidationError) -> List[str]:
    """One `key: constraint` line per validation failure."""
    problems = []
    for err in error.errors():
        key = ".".join(str(part) for part in err["loc"]) or "config"
        problems.append(f"{key}: {err['msg']}")
    return problems


def validate_config(data: Dict[str, Any], source: str = "<config>") -> ExperimentConfig:
    """
    Validate a nested dictionary into an ExperimentConfig.

    Raises:
        ConfigError: Naming every offending key and its constraint
    """
    try:
        return ExperimentConfig.from_dict(data)
    except ValidationError as e:
        problems = _describe(e)
        raise ConfigError(f"{source}: " + "; ".join(problems), {"errors": problems}) from e


def parse_config(path: str) -> ExperimentConfig:
    """
    Load and validate an experiment config file.

    Args:
        path: `.yaml`/`.yml` files are read as nested YAML; anything else as
              flat dotted `key = value` text

    Returns:
        Validated ExperimentConfig with documented defaults filled in

    Raises:
        ConfigError: Missing file, malformed syntax or constraint violation
    """
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}", {"path": path})

    if path.endswith((".yaml", ".yml")):
        try:
            data = load_yaml(path)
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: malformed YAML: {e}", {"path": path}) from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping", {"path": path})
    else:
        with open(path, "r", encoding="utf-8") as f:
            data = parse_flat_text(f.read(), source=path)

    return validate_config(data, source=path)


def flatten_config(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Flatten a config into dotted keys, in schema order."""
    flat: Dict[str, Any] = {}

    def _walk(prefix: str, node: Dict[str, Any]) -> None:
        for key, value in node.items():
            dotted = f"{prefix}{key}"
            if isinstance(value, dict):
                _walk(f"{dotted}.", value)
            else:
                flat[dotted] = value

    _walk("", cfg.to_dict())
    return flat


def dump_config(cfg: ExperimentConfig, path: str) -> None:
    """Write a config as flat `key = value` text, or YAML for .yaml/.yml paths."""
    if path.endswith((".yaml", ".yml")):
        save_yaml(cfg.to_dict(), path)
        return
    lines = []
    for key, value in flatten_config(cfg).items():
        text = "null" if value is None else json.dumps(value)
        lines.append(f"{key} = {text}")
    ensure_dir_exists(os.path.dirname(path))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def config_hash(cfg: ExperimentConfig) -> str:
    """First 12 hex digits of SHA-256 over the canonical config, seed excluded."""
    data = cfg.to_dict()
    data.pop("seed", None)
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def apply_overrides(
    cfg: ExperimentConfig, overrides: Dict[str, Any], source: str = "<overrides>"
) -> ExperimentConfig:
    """
    Validated copy of cfg with dotted-key overrides applied.

    Raises:
        ConfigError: If the overridden config violates a constraint
    """
    try:
        return cfg.with_overrides(overrides)
    except ValidationError as e:
        problems = _describe(e)
        raise ConfigError(f"{source}: " + "; ".join(problems), {"errors": problems}) from e
