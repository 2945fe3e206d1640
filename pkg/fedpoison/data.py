"""
Module/Script Name: data.py
Path: fedpoison/data.py

Description:
Deterministic synthetic classification data and client partitioning.

Provides:
- Gaussian blob datasets with well separated class means
- Stratified train/test splitting
- IID and Dirichlet label-skew partitions across clients
- Optional CSV import (header x0,...,x{k-1},label)

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

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger
from scipy.spatial.distance import pdist

from .config_schema import ExperimentConfig
from .errors import ConfigError
from .nn_core import Batch

DIRICHLET_MAX_DRAWS = 100


@dataclass(frozen=True)
class Dataset:
    """Inputs (N x input_dim), labels in [0, C) and the class count C."""

    inputs: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if inputs.ndim != 2 or labels.shape != (inputs.shape[0],):
            raise ConfigError(
                f"dataset shapes inconsistent: inputs {inputs.shape}, labels {labels.shape}"
            )
        if labels.size < self.class_count:
            raise ConfigError(f"dataset needs N >= C, got N={labels.size}, C={self.class_count}")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise ConfigError(f"labels must lie in [0, {self.class_count})")
        if np.unique(labels).size != self.class_count:
            raise ConfigError("every class must appear at least once")
        if not np.all(np.isfinite(inputs)):
            raise ConfigError("dataset inputs contain non-finite values")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.inputs.shape[1])

    def batch(self) -> Batch:
        return Batch(self.inputs, self.labels)

    def take(self, indices: Sequence[int]) -> Batch:
        """Rows at the given indices as a Batch (shards need not hold every class)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Batch(self.inputs[idx], self.labels[idx])


@dataclass(frozen=True)
class Partition:
    """Disjoint per-client index lists into one Dataset."""

    client_indices: List[np.ndarray]

    def __len__(self) -> int:
        return len(self.client_indices)

    def sizes(self) -> List[int]:
        return [int(idx.size) for idx in self.client_indices]


@dataclass(frozen=True)
class DataSplit:
    train: Dataset
    test: Dataset


def gen_blobs(C: int, per_class: int, input_dim: int, spread: float, seed: int) -> Dataset:
    """
    Gaussian clusters, one per class, class-major order.

    Class means are random directions rescaled so the closest pair sits at
    distance 4 * max(spread, 1); samples are mean + spread * N(0, I).

    Raises:
        ConfigError: If C < 2, per_class < 1, input_dim < 1 or spread <= 0
    """
    if C < 2 or per_class < 1 or input_dim < 1 or not spread > 0:
        raise ConfigError(
            f"gen_blobs needs C >= 2, per_class >= 1, input_dim >= 1, spread > 0 "
            f"(got C={C}, per_class={per_class}, input_dim={input_dim}, spread={spread})"
        )
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((C, input_dim))
    closest = float(pdist(means).min())
    means *= 4.0 * max(spread, 1.0) / closest

    inputs = np.concatenate(
        [means[c] + spread * rng.standard_normal((per_class, input_dim)) for c in range(C)]
    )
    labels = np.repeat(np.arange(C), per_class)
    return Dataset(inputs, labels, C)


def stratified_split(ds: Dataset, test_fraction: float, seed: int) -> DataSplit:
    """
    Per-class shuffled split; each class keeps at least one row on each side.

    Raises:
        ConfigError: If a class has fewer than two samples
    """
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for c in range(ds.class_count):
        members = rng.permutation(np.flatnonzero(ds.labels == c))
        if members.size < 2:
            raise ConfigError(f"class {c} needs at least 2 samples to split, has {members.size}")
        n_test = min(max(int(round(members.size * test_fraction)), 1), members.size - 1)
        test_parts.append(members[:n_test])
        train_parts.append(members[n_test:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return DataSplit(
        train=Dataset(ds.inputs[train_idx], ds.labels[train_idx], ds.class_count),
        test=Dataset(ds.inputs[test_idx], ds.labels[test_idx], ds.class_count),
    )


def partition_iid(ds: Dataset, n: int, seed: int) -> Partition:
    """
    Shuffle and deal near-equal shares (sizes differ by at most one).

    Raises:
        ConfigError: If n > N
    """
    if n < 1 or n > len(ds):
        raise ConfigError(f"cannot split {len(ds)} samples across {n} clients")
    rng = np.random.default_rng(seed)
    shares = np.array_split(rng.permutation(len(ds)), n)
    return Partition([np.sort(share) for share in shares])


def _dirichlet_draw(
    ds: Dataset, n: int, alpha: float, rng: np.random.Generator
) -> List[List[np.ndarray]]:
    assignment: List[List[np.ndarray]] = [[] for _ in range(n)]
    for c in range(ds.class_count):
        members = rng.permutation(np.flatnonzero(ds.labels == c))
        proportions = rng.dirichlet(np.full(n, alpha))
        if not np.all(np.isfinite(proportions)):
            proportions = np.full(n, 1.0 / n)
        cuts = (np.cumsum(proportions)[:-1] * members.size).astype(np.int64)
        for client, part in enumerate(np.split(members, cuts)):
            assignment[client].append(part)
    return assignment


def partition_dirichlet(ds: Dataset, n: int, alpha: float, seed: int) -> Partition:
    """
    Label-skewed partition: per class, client shares ~ Dirichlet(alpha * 1_n).

    Draws are repeated while any client is left empty; after
    DIRICHLET_MAX_DRAWS attempts, empty clients each take one sample from
    the currently largest client.

    Raises:
        ConfigError: If alpha <= 0 or n > N
    """
    if not alpha > 0:
        raise ConfigError(f"alpha must be > 0, got {alpha}")
    if n < 1 or n > len(ds):
        raise ConfigError(f"cannot split {len(ds)} samples across {n} clients")
    rng = np.random.default_rng(seed)

    shares: List[np.ndarray] = []
    for attempt in range(DIRICHLET_MAX_DRAWS):
        shares = [np.sort(np.concatenate(parts)) for parts in _dirichlet_draw(ds, n, alpha, rng)]
        if all(share.size > 0 for share in shares):
            if attempt:
                logger.debug(f"Dirichlet partition needed {attempt + 1} draws")
            return Partition(shares)

    logger.warning(
        f"Dirichlet partition left clients empty after {DIRICHLET_MAX_DRAWS} draws; repairing"
    )
    for client in range(n):
        if shares[client].size == 0:
            donor = int(np.argmax([share.size for share in shares]))
            if shares[donor].size < 2:
                raise ConfigError(
                    "cannot repair Dirichlet partition: no client holds two samples to share"
                )
            shares[client] = shares[donor][-1:]
            shares[donor] = shares[donor][:-1]
    return Partition(shares)


def load_csv_dataset(path: str, classes: Optional[int] = None) -> Dataset:
    """
    Read a dataset with header `x0,...,x{k-1},label`.

    The class count is max(label) + 1, or `classes` when that is larger.

    Raises:
        ConfigError: On a missing file, bad header or unparsable rows
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = [row for row in reader if row]
    except (OSError, StopIteration) as e:
        raise ConfigError(f"cannot read dataset csv {path}: {e}", {"path": path}) from e

    expected = [f"x{i}" for i in range(len(header) - 1)] + ["label"]
    if len(header) < 2 or [h.strip() for h in header] != expected:
        raise ConfigError(f"{path}: header must be x0,...,x{{k-1}},label", {"header": header})
    try:
        table = np.array(rows, dtype=np.float64)
    except ValueError as e:
        raise ConfigError(f"{path}: non-numeric value: {e}", {"path": path}) from e
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ConfigError(f"{path}: ragged rows", {"path": path})

    labels = table[:, -1]
    if not np.all(labels == np.round(labels)):
        raise ConfigError(f"{path}: labels must be integers", {"path": path})
    labels = labels.astype(np.int64)
    class_count = int(labels.max()) + 1
    if classes is not None:
        class_count = max(class_count, classes)
    return Dataset(table[:, :-1], labels, class_count)


def make_dataset(cfg: ExperimentConfig) -> DataSplit:
    """Build the configured dataset and its stratified train/test split."""
    data_cfg = cfg.data
    if data_cfg.generator == "csv":
        assert data_cfg.csv_path is not None
        full = load_csv_dataset(data_cfg.csv_path, data_cfg.classes)
    else:
        full = gen_blobs(
            data_cfg.classes,
            data_cfg.per_class,
            data_cfg.input_dim,
            data_cfg.spread,
            cfg.data_seed,
        )
    return stratified_split(full, data_cfg.test_fraction, cfg.data_seed)


def make_partition(cfg: ExperimentConfig, train: Dataset) -> Partition:
    """Partition the training split across cfg.n clients."""
    if cfg.data.partition == "dirichlet":
        return partition_dirichlet(train, cfg.n, cfg.data.alpha, cfg.data_seed)
    return partition_iid(train, cfg.n, cfg.data_seed)


def class_frequencies(labels: np.ndarray, class_count: int) -> np.ndarray:
    """Fraction of each class in a label vector."""
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=class_count)
    return counts / max(int(counts.sum()), 1)
