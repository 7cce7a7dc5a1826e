"""Confusion matrices and the three report scores: OA, AA, Cohen's kappa."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[t][p] = number of samples with true class t+1 predicted p+1."""

    counts: np.ndarray  # (c, c) int64
    total: int

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]

    @property
    def empty_classes(self) -> tuple[int, ...]:
        """Classes (1-based) absent from the test set; excluded from AA."""
        return tuple((np.flatnonzero(self.counts.sum(axis=1) == 0) + 1).tolist())

    def to_csv(self) -> str:
        return "\n".join(",".join(str(v) for v in row) for row in self.counts) + "\n"


def confusion(y_true, y_pred, class_count: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise DataError("label vectors must be non-empty and of equal length")
    for name, arr in (("true", y_true), ("predicted", y_pred)):
        if arr.min() < 1 or arr.max() > class_count:
            raise DataError(f"{name} labels outside 1..{class_count}")
    counts = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(counts, (y_true - 1, y_pred - 1), 1)
    return ConfusionMatrix(counts, int(y_true.size))


def overall_accuracy(cm: ConfusionMatrix) -> float:
    return float(np.trace(cm.counts)) / cm.total


def average_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall; classes with no test samples are skipped."""
    row_sums = cm.counts.sum(axis=1)
    present = row_sums > 0
    recalls = np.diag(cm.counts)[present] / row_sums[present]
    return float(recalls.mean())


def chance_agreement(cm: ConfusionMatrix) -> float:
    """Expected agreement p_e from the marginals."""
    rows = cm.counts.sum(axis=1).astype(np.float64)
    cols = cm.counts.sum(axis=0).astype(np.float64)
    return float((rows * cols).sum()) / cm.total**2


def cohen_kappa(cm: ConfusionMatrix) -> float:
    """(p_o - p_e) / (1 - p_e); defined as 0 when p_e == 1 (degenerate marginals)."""
    p_e = chance_agreement(cm)
    if p_e >= 1.0:
        return 0.0
    return (overall_accuracy(cm) - p_e) / (1.0 - p_e)
