"""
Module/Script Name: metrics.py
Path: fedpoison/metrics.py

Description:
Rank-statistic ROC-AUC for binary scores and macro one-vs-rest AUC for
multiclass probabilities. Ties earn half credit (Mann-Whitney convention).

Author(s):
fedpoison maintainers

Created Date:
2026-10-19

Version:
v1.0.0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from loguru import logger
from scipy.stats import rankdata

from .errors import ShapeError, UndefinedAUCError


@dataclass(frozen=True)
class ScoredLabels:
    """Scores (higher means more likely positive) and binary labels."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64).ravel()
        labels = np.asarray(self.labels).ravel()
        if scores.shape != labels.shape or scores.size < 1:
            raise ShapeError(
                f"scores {scores.shape} and labels {labels.shape} must be equal and non-empty",
                component="metrics",
            )
        if not np.all(np.isin(labels, (0, 1))):
            raise ShapeError("binary labels must be 0 or 1", component="metrics")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels.astype(bool))


def roc_auc_binary(sl: ScoredLabels) -> float:
    """
    Mann-Whitney AUC: (concordant pairs + 0.5 * tied pairs) / (#pos * #neg).

    Computed from average ranks, O(N log N).

    Raises:
        UndefinedAUCError: If only one class is present
    """
    n_pos = int(sl.labels.sum())
    n_neg = int(sl.labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError(
            "AUC undefined for single-class labels", {"positives": n_pos, "negatives": n_neg}
        )
    ranks = rankdata(sl.scores, method="average")
    u_statistic = float(ranks[sl.labels].sum()) - n_pos * (n_pos + 1) / 2.0
    return u_statistic / (n_pos * n_neg)


def macro_ovr_auc(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """
    Unweighted mean over classes of the one-vs-rest AUC of each column.

    Classes whose one-vs-rest labels are single-class are skipped with a
    warning.

    Raises:
        UndefinedAUCError: If no class yields a defined AUC
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probabilities.ndim != 2 or probabilities.shape[0] != labels.shape[0]:
        raise ShapeError(
            f"probabilities {probabilities.shape} do not match labels {labels.shape}",
            component="metrics",
        )

    aucs = []
    for c in range(probabilities.shape[1]):
        try:
            aucs.append(roc_auc_binary(ScoredLabels(probabilities[:, c], labels == c)))
        except UndefinedAUCError:
            logger.warning(f"class {c} has no one-vs-rest contrast; excluded from macro AUC")
    if not aucs:
        raise UndefinedAUCError("no class has both positives and negatives")
    return float(np.mean(aucs))
