"""
Module/Script Name: errors.py
Path: fedpoison/errors.py

Description:
Exception hierarchy shared by all fedpoison components.

Every error carries the component that raised it and an optional details
dict, so the CLI and sweep runner can report failures without parsing
message strings.

Author(s):
fedpoison maintainers

Created Date:
2026-10-19

Version:
v1.0.0
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class FedPoisonError(Exception):
    """Base exception for simulator errors."""

    def __init__(
        self,
        message: str,
        component: str = "fedpoison",
        details: Optional[Dict[str, Any]] = None,
    ):
        self.message = message
        self.component = component
        self.details = details or {}
        super().__init__(f"[{component}] {message}")


class ConfigError(FedPoisonError):
    """Invalid, malformed or missing experiment configuration."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "config", details)


class ShapeError(FedPoisonError):
    """Vector or matrix dimensions do not match."""

    def __init__(
        self, message: str, component: str = "nn_core", details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message, component, details)


class NumericError(FedPoisonError):
    """Non-finite value encountered in a loss, gradient or parameter vector."""

    def __init__(
        self, message: str, component: str = "nn_core", details: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message, component, details)


class AggregationError(FedPoisonError):
    """Aggregation rule preconditions violated."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "aggregation", details)


class AttackError(FedPoisonError):
    """Attack preconditions violated."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "attacks", details)


class DegenerateAttackError(AttackError):
    """The malicious gradient vanished and cannot be normalized."""


class UndefinedAUCError(FedPoisonError):
    """AUC requested for labels that contain a single class."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "metrics", details)
