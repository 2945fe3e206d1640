"""
Module/Script Name: utils.py
Path: fedpoison/utils.py

Description:
Utility functions for the fedpoison package.

Provides:
- YAML loading (duplicate keys rejected) and YAML/JSON saving helpers
- Directory utilities
- Deterministic float formatting for CSV output

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

import json
import math
import os
from typing import Any, Dict, Optional

import yaml


class UniqueKeyLoader(yaml.SafeLoader):
    """SafeLoader that refuses mappings with repeated keys."""

    def construct_mapping(self, node: yaml.MappingNode, deep: bool = False) -> Dict[Any, Any]:
        seen = set()
        for key_node, _ in node.value:
            key = self.construct_object(key_node, deep=deep)  # type: ignore[no-untyped-call]
            if key in seen:
                raise yaml.constructor.ConstructorError(
                    None, None, f"duplicate key '{key}'", key_node.start_mark
                )
            seen.add(key)
        return super().construct_mapping(node, deep=deep)


def load_yaml(path: str) -> Dict[str, Any]:
    """
    Load YAML file and return as dictionary.

    Args:
        path: Path to YAML file

    Returns:
        Dictionary with YAML contents (empty dict for an empty file)

    Raises:
        FileNotFoundError: If file doesn't exist
        yaml.YAMLError: If YAML is invalid or repeats a key
    """
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.load(f, Loader=UniqueKeyLoader)
    return data or {}


def save_yaml(data: Dict[str, Any], path: str) -> None:
    """
    Save dictionary as YAML file.

    Args:
        data: Dictionary to save
        path: Output file path
    """
    ensure_dir_exists(os.path.dirname(path))
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)


def parse_scalar(text: str) -> Any:
    """Parse one config value as a YAML scalar or flow collection."""
    return yaml.safe_load(text)


def save_json(data: Dict[str, Any], path: str, indent: int = 2) -> None:
    """
    Save dictionary as JSON file.

    Args:
        data: Dictionary to save
        path: Output file path
        indent: Indentation spaces (default 2)
    """
    ensure_dir_exists(os.path.dirname(path))
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=indent, ensure_ascii=False, sort_keys=True)
        f.write("\n")


def ensure_dir_exists(path: str) -> None:
    """
    Ensure directory exists, creating it if necessary.

    Args:
        path: Directory path (empty string means the working directory)
    """
    if path:
        os.makedirs(path, exist_ok=True)


def format_float(value: Optional[float]) -> str:
    """Round-trip exact text for a float; empty for None, 'nan' for NaN."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")
