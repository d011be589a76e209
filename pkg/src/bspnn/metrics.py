"""Confusion matrix, per-class detection and false-alarm rates, and the
cost-weighted average misclassification cost."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ClassIndexOutOfRange,
    DimensionMismatch,
    EmptyClass,
    EmptyComplement,
    EmptyMatrix,
    LengthMismatch,
    ValidationError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i, j] = instances of true class i predicted as class j."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        k = len(self.class_names)
        if counts.shape != (k, k):
            raise DimensionMismatch(
                f"confusion matrix shape {counts.shape} does not match "
                f"{k} class names"
            )
        if np.any(counts < 0):
            raise ValidationError("confusion counts must be non-negative")

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)


@dataclass(frozen=True)
class CostMatrix:
    """costs[i, j] = penalty for predicting class j on a true class i."""

    costs: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=np.float64)
        object.__setattr__(self, "costs", costs)
        k = len(self.class_names)
        if costs.shape != (k, k):
            raise DimensionMismatch(
                f"cost matrix shape {costs.shape} does not match {k} class names"
            )

    @classmethod
    def zero_one(cls, class_names: Sequence[str]) -> "CostMatrix":
        k = len(class_names)
        return cls(costs=1.0 - np.eye(k), class_names=tuple(class_names))


def confusion(
    preds: Sequence[int], truths: Sequence[int], class_names: Sequence[str]
) -> ConfusionMatrix:
    """Count (true, predicted) pairs into a class_count x class_count grid."""
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape:
        raise LengthMismatch(
            f"{preds.size} predictions vs {truths.size} truths"
        )
    k = len(class_names)
    if preds.size and (
        preds.min() < 0 or preds.max() >= k or truths.min() < 0 or truths.max() >= k
    ):
        raise ClassIndexOutOfRange(f"class indices outside [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (truths, preds), 1)
    return ConfusionMatrix(counts=counts, class_names=tuple(class_names))


def detection_rate(cm: ConfusionMatrix, k: int) -> float:
    """Fraction of true class-k instances predicted as class k."""
    row_total = int(cm.counts[k].sum())
    if row_total == 0:
        raise EmptyClass(f"no instances of class {cm.class_names[k]!r}")
    return float(cm.counts[k, k] / row_total)


def false_alarm_rate(cm: ConfusionMatrix, k: int) -> float:
    """Fraction of non-k instances predicted as class k."""
    others = [i for i in range(cm.class_count) if i != k]
    complement = int(cm.counts[others].sum())
    if complement == 0:
        raise EmptyComplement(
            f"no instances outside class {cm.class_names[k]!r}"
        )
    false_hits = int(cm.counts[others, k].sum())
    return float(false_hits / complement)


def average_cost(cm: ConfusionMatrix, cost: CostMatrix) -> float:
    """Mean per-record misclassification cost:

        (1/N) * sum_ij counts[i, j] * costs[i, j]
    """
    if cm.counts.shape != cost.costs.shape:
        raise DimensionMismatch(
            f"confusion {cm.counts.shape} vs cost {cost.costs.shape}"
        )
    n = cm.total
    if n == 0:
        raise EmptyMatrix("average cost is undefined over zero records")
    return float((cm.counts * cost.costs).sum() / n)


def safe_rate(fn, cm: ConfusionMatrix, k: int) -> float | None:
    """Rate value, or None when the class (or its complement) is empty."""
    try:
        return fn(cm, k)
    except (EmptyClass, EmptyComplement):
        return None


def load_cost_matrix(
    path: str, allow_nonzero_diagonal: bool = False
) -> CostMatrix:
    """Load "names header + K rows of K reals" and check the zero diagonal."""
    with open(path, encoding="ascii") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if not rows:
        raise ValidationError(f"cost matrix file {path!r} is empty")
    names = tuple(n.strip() for n in rows[0].split(","))
    k = len(names)
    if len(rows) != k + 1:
        raise ValidationError(
            f"cost matrix file {path!r} needs {k} rows after the header, "
            f"got {len(rows) - 1}"
        )
    try:
        costs = np.asarray(
            [[float(v) for v in row.split(",")] for row in rows[1:]]
        )
    except ValueError as exc:
        raise ValidationError(f"cost matrix file {path!r}: {exc}") from None
    if costs.shape != (k, k):
        raise ValidationError(
            f"cost matrix file {path!r} is not {k}x{k}"
        )
    diag = np.diagonal(costs)
    if np.any(diag != 0.0):
        if not allow_nonzero_diagonal:
            raise ValidationError(
                f"cost matrix {path!r} has nonzero diagonal entries; correct "
                "classifications are expected to cost nothing (pass "
                "allow_nonzero_diagonal to override)"
            )
        logger.warning("cost matrix %s has nonzero diagonal entries", path)
    return CostMatrix(costs=costs, class_names=names)
