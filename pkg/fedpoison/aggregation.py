"""
Module/Script Name: aggregation.py
Path: fedpoison/aggregation.py

Description:
Server-side aggregation rules and the registry that selects them.

Supports:
- FedAvg (unweighted mean, the undefended baseline)
- KRUM (single update closest to its n - f - 2 nearest neighbours)
- Coordinate-wise Trimmed Mean
- DOS: COPOD outlier scores over pairwise Euclidean and cosine distances,
  turned into softmax weights

All rules implement the AggregationRule protocol. Updates are put in
client-id order before any arithmetic, so the same set of updates always
gives a bit-identical aggregate whatever order it arrives in. Weights are
reported in the caller's order.

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

from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Protocol, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist
from scipy.special import softmax
from scipy.stats import skew

from .errors import AggregationError

UpdateKind = Literal["parameters", "gradients"]

KRUM_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class ClientUpdate:
    """One client's per-round submission."""

    client_id: int
    kind: UpdateKind
    vector: np.ndarray
    num_samples: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=np.float64))


@dataclass(frozen=True)
class AggregationOutcome:
    """Aggregate plus per-client weights (input order) and rule diagnostics."""

    aggregate: np.ndarray
    weights: np.ndarray
    client_ids: List[int]
    selected: Optional[int] = None  # KRUM: client id of the chosen update
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def weights_by_client(self) -> List[Tuple[int, float]]:
        """(client_id, weight) pairs sorted by client id."""
        return sorted(zip(self.client_ids, (float(w) for w in self.weights)))


def _canonical(updates: Sequence[ClientUpdate]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Validate a round's updates and stack them in client-id order.

    Returns:
        (order, matrix) where matrix[j] = updates[order[j]].vector

    Raises:
        AggregationError: On an empty list, ragged lengths or mixed kinds
    """
    if not updates:
        raise AggregationError("no client updates to aggregate")
    lengths = {u.vector.shape for u in updates}
    if len(lengths) != 1 or next(iter(lengths)) != (updates[0].vector.size,):
        raise AggregationError(
            "client updates have ragged lengths", {"shapes": sorted(str(s) for s in lengths)}
        )
    kinds = {u.kind for u in updates}
    if len(kinds) != 1:
        raise AggregationError("client updates mix parameters and gradients")
    order = np.argsort([u.client_id for u in updates], kind="stable")
    matrix = np.stack([updates[i].vector for i in order])
    return order, matrix


def _to_input_order(order: np.ndarray, canonical_values: np.ndarray) -> np.ndarray:
    values = np.empty_like(canonical_values)
    values[order] = canonical_values
    return values


def fedavg(updates: Sequence[ClientUpdate]) -> AggregationOutcome:
    """Unweighted mean of all updates."""
    order, matrix = _canonical(updates)
    n = matrix.shape[0]
    return AggregationOutcome(
        aggregate=matrix.mean(axis=0),
        weights=np.full(n, 1.0 / n),
        client_ids=[u.client_id for u in updates],
    )


def krum(updates: Sequence[ClientUpdate], f: int) -> AggregationOutcome:
    """
    KRUM: pick the update with the smallest sum of squared Euclidean
    distances to its m = n - f - 2 nearest other updates.

    Scores within a relative 1e-9 of the minimum count as tied; ties go to
    the lowest client id.

    Raises:
        AggregationError: If n < f + 3
    """
    order, matrix = _canonical(updates)
    n = matrix.shape[0]
    m = n - f - 2
    if f < 0 or m < 1:
        raise AggregationError(f"krum needs n >= f + 3 (got n={n}, f={f})", {"n": n, "f": f})

    sq_dists = cdist(matrix, matrix, metric="sqeuclidean")
    scores = np.empty(n)
    for i in range(n):
        others = np.sort(np.delete(sq_dists[i], i))
        scores[i] = others[:m].sum()

    best = scores.min()
    tied = np.flatnonzero(scores <= best + KRUM_TIE_RTOL * abs(best))
    chosen = int(tied[0])

    canonical_weights = np.zeros(n)
    canonical_weights[chosen] = 1.0
    selected_id = updates[order[chosen]].client_id
    logger.debug(f"krum: selected client {selected_id} (score {best:.6g})")
    return AggregationOutcome(
        aggregate=matrix[chosen].copy(),
        weights=_to_input_order(order, canonical_weights),
        client_ids=[u.client_id for u in updates],
        selected=selected_id,
        diagnostics={"scores": _to_input_order(order, scores).tolist(), "neighbours": m},
    )


def trimmed_mean(updates: Sequence[ClientUpdate], trim_k: int) -> AggregationOutcome:
    """
    Per coordinate, drop the trim_k smallest and trim_k largest values and
    average the rest.

    Reported weights are each client's share of retained (coordinate, value)
    slots; they are diagnostics only.

    Raises:
        AggregationError: If 2 * trim_k >= n
    """
    order, matrix = _canonical(updates)
    n, d = matrix.shape
    if trim_k < 0 or 2 * trim_k >= n:
        raise AggregationError(
            f"trimmed_mean needs 2 * trim_k < n (got trim_k={trim_k}, n={n})",
            {"trim_k": trim_k, "n": n},
        )
    ranking = np.argsort(matrix, axis=0, kind="stable")
    kept_rows = ranking[trim_k : n - trim_k]
    kept_values = np.take_along_axis(matrix, kept_rows, axis=0)
    retained = np.bincount(kept_rows.ravel(), minlength=n).astype(np.float64)
    return AggregationOutcome(
        aggregate=kept_values.mean(axis=0),
        weights=_to_input_order(order, retained / (d * (n - 2 * trim_k))),
        client_ids=[u.client_id for u in updates],
        diagnostics={"trim_k": trim_k},
    )


def copod_scores(feature_matrix: np.ndarray) -> np.ndarray:
    """
    COPOD outlier scores, one per row.

    Per column j, left and right empirical tail probabilities
    F_l(x) = #{i: x_ij <= x} / n and F_r(x) = #{i: x_ij >= x} / n are turned
    into U = -ln F. The skewness-corrected tail is U_l for negatively skewed
    columns, U_r for positively skewed ones and their average for symmetric
    or constant columns. A row's score is sum_j max(U_skew, (U_l + U_r) / 2).
    ECDF values are at least 1/n, so scores are finite and non-negative.

    Raises:
        AggregationError: If fewer than two rows are given
    """
    x = np.asarray(feature_matrix, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise AggregationError(f"copod needs at least 2 rows, got {n}")

    sorted_cols = np.sort(x, axis=0)
    left = np.empty_like(x)
    right = np.empty_like(x)
    for j in range(x.shape[1]):
        left[:, j] = np.searchsorted(sorted_cols[:, j], x[:, j], side="right") / n
        right[:, j] = (n - np.searchsorted(sorted_cols[:, j], x[:, j], side="left")) / n
    u_left = -np.log(left)
    u_right = -np.log(right)

    skewness = np.zeros(x.shape[1])
    varying = np.ptp(x, axis=0) > 0
    if varying.any():
        skewness[varying] = np.nan_to_num(skew(x[:, varying], axis=0))
    two_sided = (u_left + u_right) / 2.0
    u_skew = np.where(skewness < 0, u_left, np.where(skewness > 0, u_right, two_sided))
    return np.maximum(u_skew, two_sided).sum(axis=1)


def cosine_distance_matrix(matrix: np.ndarray) -> np.ndarray:
    """
    Pairwise 1 - cosine similarity. A zero vector is at distance 1 from every
    non-zero vector and 0 from another zero vector.
    """
    nonzero = np.linalg.norm(matrix, axis=1) > 0
    n = matrix.shape[0]
    dist = np.ones((n, n))
    dist[np.ix_(~nonzero, ~nonzero)] = 0.0
    if nonzero.any():
        rows = matrix[nonzero]
        dist[np.ix_(nonzero, nonzero)] = np.clip(cdist(rows, rows, metric="cosine"), 0.0, 2.0)
    return dist


def dos_aggregate(updates: Sequence[ClientUpdate]) -> AggregationOutcome:
    """
    Distance-based Outlier Suppression.

    COPOD scores the rows of the pairwise Euclidean and cosine distance
    matrices separately; each client's score is the mean of the two, and the
    weights are softmax(-score).

    Raises:
        AggregationError: If fewer than three updates are given
    """
    order, matrix = _canonical(updates)
    n = matrix.shape[0]
    if n < 3:
        raise AggregationError(f"dos needs at least 3 updates, got {n}", {"n": n})

    euclidean_scores = copod_scores(cdist(matrix, matrix, metric="euclidean"))
    cosine_scores = copod_scores(cosine_distance_matrix(matrix))
    scores = (euclidean_scores + cosine_scores) / 2.0
    weights = softmax(-scores)
    logger.debug(f"dos: scores {np.round(scores, 4).tolist()}")
    return AggregationOutcome(
        aggregate=weights @ matrix,
        weights=_to_input_order(order, weights),
        client_ids=[u.client_id for u in updates],
        diagnostics={
            "scores": _to_input_order(order, scores).tolist(),
            "euclidean_scores": _to_input_order(order, euclidean_scores).tolist(),
            "cosine_scores": _to_input_order(order, cosine_scores).tolist(),
        },
    )


class AggregationRule(Protocol):
    """Defense contract that every server aggregation rule implements."""

    @property
    def name(self) -> str:
        """Rule name (e.g., 'fedavg', 'krum', 'trimmed_mean', 'dos')."""
        ...

    def aggregate(self, updates: Sequence[ClientUpdate]) -> AggregationOutcome:
        """
        Combine one round of client updates.

        Raises:
            AggregationError: If the rule's preconditions do not hold
        """
        ...


class FedAvgRule:
    @property
    def name(self) -> str:
        return "fedavg"

    def aggregate(self, updates: Sequence[ClientUpdate]) -> AggregationOutcome:
        return fedavg(updates)


class KrumRule:
    def __init__(self, f: int):
        self.f = f

    @property
    def name(self) -> str:
        return "krum"

    def aggregate(self, updates: Sequence[ClientUpdate]) -> AggregationOutcome:
        return krum(updates, self.f)


class TrimmedMeanRule:
    def __init__(self, trim_k: int):
        self.trim_k = trim_k

    @property
    def name(self) -> str:
        return "trimmed_mean"

    def aggregate(self, updates: Sequence[ClientUpdate]) -> AggregationOutcome:
        return trimmed_mean(updates, self.trim_k)


class DosRule:
    @property
    def name(self) -> str:
        return "dos"

    def aggregate(self, updates: Sequence[ClientUpdate]) -> AggregationOutcome:
        return dos_aggregate(updates)


class DefenseRegistry:
    """Registry for managing available aggregation rules."""

    def __init__(self) -> None:
        self._rules: Dict[str, AggregationRule] = {}

    def register(self, rule: AggregationRule) -> None:
        """Register a rule under its name."""
        self._rules[rule.name] = rule

    def get(self, name: str) -> AggregationRule:
        """Get a rule by name."""
        if name not in self._rules:
            raise KeyError(f"Defense '{name}' not registered")
        return self._rules[name]

    def available(self) -> List[str]:
        return sorted(self._rules.keys())

    def has_rule(self, name: str) -> bool:
        return name in self._rules


def create_default_registry(f: int = 0, trim_k: Optional[int] = None) -> DefenseRegistry:
    """
    Create a registry with all built-in rules.

    Args:
        f: Byzantine count KRUM assumes
        trim_k: Values trimmed per side by Trimmed Mean (default: f)
    """
    registry = DefenseRegistry()
    registry.register(FedAvgRule())
    registry.register(KrumRule(f))
    registry.register(TrimmedMeanRule(f if trim_k is None else trim_k))
    registry.register(DosRule())
    return registry
