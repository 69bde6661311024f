"""Confusion matrices and aggregate scores.

The harvested state classes are wildly imbalanced (a handful of
prototypes against hundreds of thousands of learned and spurious
rows), so accuracy alone is misleading and macro F1, which weighs
every class equally, is the headline number.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["ClassScores", "ConfusionMatrix", "ScoreReport", "confuse", "score"]


@dataclass
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    class_set: tuple
    counts: np.ndarray

    def __post_init__(self):
        self.class_set = tuple(self.class_set)
        c = np.asarray(self.counts, dtype=np.int64)
        k = len(self.class_set)
        if c.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k} to match class_set")
        if (c < 0).any():
            raise ValueError("counts must be non-negative")
        self.counts = c

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float


@dataclass
class ScoreReport:
    accuracy: float
    micro_f1: float
    macro_f1: float
    per_class: dict


def confuse(predictions, truths, class_set):
    """Tally a confusion matrix over an ordered class set."""
    class_set = tuple(class_set)
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths must have equal length")
    index = {c: i for i, c in enumerate(class_set)}
    counts = np.zeros((len(class_set), len(class_set)), dtype=np.int64)
    for pred, true in zip(predictions, truths):
        if true not in index:
            raise ValueError(f"true label {true!r} not in class_set")
        if pred not in index:
            raise ValueError(f"predicted label {pred!r} not in class_set")
        counts[index[true], index[pred]] += 1
    return ConfusionMatrix(class_set=class_set, counts=counts)


def score(cm):
    """Accuracy, micro and macro F1, and per-class precision/recall/F1.

    A class with no true positives and nothing predicted scores zero
    across the board, and macro F1 averages over the full class_set, so
    classes absent from a fold still pull the mean down.
    """
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(counts).astype(np.float64)
    pred_tot = counts.sum(axis=0).astype(np.float64)
    true_tot = counts.sum(axis=1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(pred_tot > 0, tp / pred_tot, 0.0)
        recall = np.where(true_tot > 0, tp / true_tot, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    acc = float(tp.sum() / total)
    per_class = {
        c: ClassScores(precision=float(p), recall=float(r), f1=float(f))
        for c, p, r, f in zip(cm.class_set, precision, recall, f1)
    }
    return ScoreReport(
        accuracy=acc,
        micro_f1=acc,
        macro_f1=float(f1.mean()),
        per_class=per_class,
    )
