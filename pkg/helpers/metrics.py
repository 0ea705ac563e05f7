"""Binary classification metrics at a fixed decision threshold."""

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from helpers.errors import ConfigurationError, InputError, UndefinedMetricError


def _as_binary(labels) -> np.ndarray:
    labels = np.asarray(labels).reshape(-1)
    if not np.all((labels == 0) | (labels == 1)):
        raise InputError("labels must be 0 or 1")
    return labels.astype(np.int64)


def _check_pair(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = _as_binary(labels)
    if scores.shape != labels.shape:
        raise InputError(f"{scores.size} scores but {labels.size} labels")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise UndefinedMetricError("ROC-AUC needs both classes present")
    return scores, labels


def roc_auc(scores, labels) -> float:
    """
    Area under the ROC curve by the trapezoidal rule over distinct thresholds.

    Tied scores form a single step of the curve, which is the same as
    counting every tied positive/negative pair as one half.

    Raises:
        UndefinedMetricError: if only one class is present.
    """
    scores, labels = _check_pair(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.diff(sorted_scores) != 0)
    ends = np.append(ends, sorted_scores.size - 1)
    tps = np.cumsum(sorted_labels)[ends]
    fps = (ends + 1) - tps
    tpr = np.concatenate([[0.0], tps / tps[-1]])
    fpr = np.concatenate([[0.0], fps / fps[-1]])
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def pairwise_concordance(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties count 1/2."""
    scores, labels = _check_pair(scores, labels)
    pos = scores[labels == 1][:, None]
    neg = scores[labels == 0][None, :]
    wins = (pos > neg).sum() + 0.5 * (pos == neg).sum()
    return float(wins / (pos.size * neg.size))


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(probabilities, labels, threshold: float = 0.5) -> Confusion:
    """Predict class 1 when probability >= threshold."""
    probabilities = np.asarray(probabilities, dtype=np.float64).reshape(-1)
    labels = _as_binary(labels)
    if probabilities.shape != labels.shape:
        raise InputError(f"{probabilities.size} predictions but {labels.size} labels")
    predicted = probabilities >= threshold
    actual = labels == 1
    return Confusion(
        tp=int(np.sum(predicted & actual)),
        fp=int(np.sum(predicted & ~actual)),
        tn=int(np.sum(~predicted & ~actual)),
        fn=int(np.sum(~predicted & actual)),
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_auc: float | None
    val_loss: float
    val_auc: float | None


@dataclass
class MetricsReport:
    threshold: float
    confusion: Confusion
    roc_auc: float | None
    curves: list[EpochRecord] = field(default_factory=list)

    @property
    def sensitivity(self) -> float:
        c = self.confusion
        return _ratio(c.tp, c.tp + c.fn)

    @property
    def specificity(self) -> float:
        c = self.confusion
        return _ratio(c.tn, c.tn + c.fp)

    @property
    def accuracy(self) -> float:
        c = self.confusion
        return _ratio(c.tp + c.tn, c.total)

    @property
    def precision(self) -> float:
        c = self.confusion
        return _ratio(c.tp, c.tp + c.fp)

    @property
    def f1(self) -> float:
        """0 when nothing is predicted positive."""
        precision, recall = self.precision, self.sensitivity
        if precision + recall == 0:
            return 0.0
        return 2 * precision * recall / (precision + recall)

    def to_dict(self) -> dict[str, Any]:
        return {
            "threshold": self.threshold,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "roc_auc": self.roc_auc,
            "confusion": asdict(self.confusion),
            "curves": [asdict(record) for record in self.curves],
        }


def metrics_report(probabilities, labels, threshold: float = 0.5) -> MetricsReport:
    if not 0.0 <= threshold <= 1.0 or math.isnan(threshold):
        raise ConfigurationError(f"threshold must be in [0, 1], got {threshold}")
    try:
        auc = roc_auc(probabilities, labels)
    except UndefinedMetricError:
        auc = None
    return MetricsReport(
        threshold=threshold,
        confusion=confusion(probabilities, labels, threshold),
        roc_auc=auc,
    )


def class_weights(train_labels) -> tuple[float, float]:
    """
    Balanced weights total / (2 * count_c) for classes 0 and 1.

    Raises:
        ConfigurationError: if the training labels hold a single class.
    """
    labels = _as_binary(train_labels)
    total = labels.size
    n_pos = int(labels.sum())
    n_neg = total - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ConfigurationError(
            f"class weighting needs both classes in the training set, got "
            f"{n_neg} negative and {n_pos} positive samples"
        )
    return total / (2.0 * n_neg), total / (2.0 * n_pos)
