"""
Module/Script Name: config_schema.py
Path: fedpoison/config_schema.py

Description:
Configuration schema and validation for federated poisoning experiments.

Provides pydantic models for:
- Dataset generation and client partitioning
- Model shape (hidden layers of the MLP)
- Defense (aggregation rule) selection
- Attack selection and attacker hyperparameters
- Output options
- The complete ExperimentConfig with cross-field constraints

Unknown keys are rejected at every level. Defaults follow the parameter
aggregation protocol: 10 clients, 4 attackers, learning rate 0.01, one local
epoch.

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

import copy
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Mode = Literal["parameters", "gradients"]
DefenseKind = Literal["fedavg", "krum", "trimmed_mean", "dos"]
AttackKind = Literal["none", "disbelieve", "lie", "min_max", "noise", "scale", "label_flip"]
OptimizerName = Literal["sgd", "adam"]

DEFENSE_KINDS: Tuple[str, ...] = ("fedavg", "krum", "trimmed_mean", "dos")
ATTACK_KINDS: Tuple[str, ...] = (
    "none",
    "disbelieve",
    "lie",
    "min_max",
    "noise",
    "scale",
    "label_flip",
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataConfig(_Section):
    """Dataset source, train/test split and client partition."""

    generator: Literal["blobs", "csv"] = "blobs"
    classes: int = Field(2, ge=2)
    per_class: int = Field(500, ge=1)
    input_dim: int = Field(20, ge=1)
    spread: float = Field(1.0, gt=0)
    csv_path: Optional[str] = None
    test_fraction: float = Field(0.2, gt=0, lt=1)
    partition: Literal["iid", "dirichlet"] = "iid"
    alpha: float = Field(0.5, gt=0)
    seed: Optional[int] = Field(None, ge=0)  # None: use the experiment seed

    @model_validator(mode="after")
    def _csv_needs_path(self) -> DataConfig:
        if self.generator == "csv" and not self.csv_path:
            raise ValueError("data.csv_path is required when data.generator = csv")
        return self


class ModelConfig(_Section):
    """Hidden layer widths; input and output widths come from the data."""

    hidden: List[int] = Field(default_factory=lambda: [16])

    @field_validator("hidden")
    @classmethod
    def _positive_widths(cls, value: List[int]) -> List[int]:
        if any(width < 1 for width in value):
            raise ValueError("model.hidden widths must be >= 1")
        return value


class DefenseConfig(_Section):
    """Server aggregation rule."""

    kind: DefenseKind = "dos"
    f_assumed: Optional[int] = Field(None, ge=0)  # KRUM byzantine count, default f
    trim_k: Optional[int] = Field(None, ge=0)  # Trimmed Mean count, default f


class AttackConfig(_Section):
    """Attack selection and attacker-side hyperparameters."""

    kind: AttackKind = "none"
    z: float = 1.5
    direction: Literal["inverse-unit", "negative-std"] = "inverse-unit"
    sigma: float = Field(1.0, ge=0)
    scale: float = 10.0
    max_epochs: int = Field(5, ge=0)  # DISBELIEVE on parameters
    grad_epochs: int = Field(1, ge=0)  # DISBELIEVE on gradients
    optimizer: Optional[OptimizerName] = None  # None: honest clients' optimizer
    lr: Optional[float] = Field(None, gt=0)
    batch_size: Optional[int] = Field(None, ge=1)


class OutputConfig(_Section):
    """Output options. Wallclock times break byte-identical reruns, so off by default."""

    wallclock: bool = False


class ExperimentConfig(_Section):
    """Complete experiment configuration."""

    n: int = Field(10, ge=1)
    f: int = Field(4, ge=0)
    rounds: int = Field(30, ge=1)
    mode: Mode = "parameters"
    local_epochs: int = Field(1, ge=0)
    batch_size: int = Field(16, ge=1)
    lr_local: float = Field(0.01, gt=0)
    lr_server: float = Field(1.0, gt=0)
    optimizer: OptimizerName = "sgd"
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    seed: int = Field(0, ge=0)
    data: DataConfig = Field(default_factory=DataConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    defense: DefenseConfig = Field(default_factory=DefenseConfig)
    attack: AttackConfig = Field(default_factory=AttackConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _check_constraints(self) -> ExperimentConfig:
        if self.attack.kind != "none":
            if not (2 <= self.f and 2 * self.f < self.n):
                raise ValueError(
                    f"f must satisfy 2 <= f < n/2 (got f={self.f}, n={self.n})"
                )
        elif 2 * self.f >= self.n:
            raise ValueError(f"f must satisfy 0 <= f < n/2 (got f={self.f}, n={self.n})")

        if self.defense.kind == "krum" and self.n < self.assumed_f + 3:
            raise ValueError(
                f"krum needs n >= f_assumed + 3 (got n={self.n}, f_assumed={self.assumed_f})"
            )
        if self.defense.kind == "trimmed_mean" and 2 * self.trim_k >= self.n:
            raise ValueError(
                f"trimmed_mean needs 2 * trim_k < n (got trim_k={self.trim_k}, n={self.n})"
            )
        if self.defense.kind == "dos" and self.n < 3:
            raise ValueError(f"dos needs n >= 3 (got n={self.n})")
        return self

    @property
    def assumed_f(self) -> int:
        return self.f if self.defense.f_assumed is None else self.defense.f_assumed

    @property
    def trim_k(self) -> int:
        return self.f if self.defense.trim_k is None else self.defense.trim_k

    @property
    def data_seed(self) -> int:
        return self.seed if self.data.seed is None else self.data.seed

    def layer_sizes(self, input_dim: int, classes: int) -> Tuple[int, ...]:
        return (input_dim, *self.model.hidden, classes)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> ExperimentConfig:
        """Create ExperimentConfig from a nested dictionary."""
        return cls.model_validate(data)

    def to_dict(self) -> Dict[str, Any]:
        """Convert ExperimentConfig to a JSON-compatible nested dictionary."""
        return self.model_dump(mode="json")

    def with_overrides(self, overrides: Dict[str, Any]) -> ExperimentConfig:
        """
        Return a validated copy with dotted-key overrides applied.

        Args:
            overrides: e.g. {"seed": 3, "attack.kind": "lie"}
        """
        data = copy.deepcopy(self.to_dict())
        for dotted, value in overrides.items():
            set_dotted(data, dotted, value)
        return ExperimentConfig.from_dict(data)


def set_dotted(data: Dict[str, Any], dotted: str, value: Any) -> None:
    """Assign value into a nested dict at a dotted path, creating sections."""
    *sections, leaf = dotted.split(".")
    node = data
    for section in sections:
        child = node.setdefault(section, {})
        if not isinstance(child, dict):
            raise ValueError(f"'{section}' is a value, not a section, in key '{dotted}'")
        node = child
    node[leaf] = value
