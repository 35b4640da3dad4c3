"""Detection metrics: completeness and accuracy rates, confusion matrices."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DetectionCounts:
    """Attack recognition tallies: total true attacks, identified, correct."""

    total: int        # true attacks present
    identified: int   # attacks the method reported
    correct: int      # reported attacks that are right

    def __post_init__(self):
        if self.total < 0 or self.identified < 0:
            raise ValueError("counts must be non-negative")
        if not 0 <= self.correct <= min(self.total, self.identified):
            raise ValueError(
                f"correct={self.correct} must satisfy "
                f"0 <= correct <= min(total={self.total}, identified={self.identified})"
            )


def completeness(counts: DetectionCounts) -> float:
    """Fraction of true attacks that were found (correct / total)."""
    if counts.total == 0:
        raise ValueError("completeness undefined for zero true attacks")
    return counts.correct / counts.total


def accuracy_rate(counts: DetectionCounts) -> float:
    """Fraction of reported attacks that are right (correct / identified)."""
    if counts.identified == 0:
        raise ValueError("accuracy rate undefined when nothing was identified")
    return counts.correct / counts.identified


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row = actual class, column = predicted class.

    Per-class precision/recall with a zero denominator are reported as 0 and
    the class name is recorded in the corresponding ``undefined_*`` set so
    downstream tables stay numeric.
    """

    classes: tuple[str, ...]
    counts: np.ndarray
    precision: dict[str, float]
    recall: dict[str, float]
    accuracy: float
    undefined_precision: frozenset[str]
    undefined_recall: frozenset[str]

    def row(self, actual: str) -> np.ndarray:
        return self.counts[self.classes.index(actual)]


def confusion(y_true, y_pred, classes: tuple[str, ...] | None = None) -> ConfusionMatrix:
    """Build a confusion matrix with per-class precision/recall and accuracy."""
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise ValueError(f"label lists differ in length: {len(y_true)} vs {len(y_pred)}")
    if classes is None:
        seen: list[str] = []
        for label in (*y_true, *y_pred):
            if label not in seen:
                seen.append(label)
        classes = tuple(seen)
    index = {name: i for i, name in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for actual, predicted in zip(y_true, y_pred):
        counts[index[actual], index[predicted]] += 1

    precision: dict[str, float] = {}
    recall: dict[str, float] = {}
    undef_p: set[str] = set()
    undef_r: set[str] = set()
    for i, name in enumerate(classes):
        col = counts[:, i].sum()
        row = counts[i, :].sum()
        if col > 0:
            precision[name] = counts[i, i] / col
        else:
            precision[name] = 0.0
            undef_p.add(name)
        if row > 0:
            recall[name] = counts[i, i] / row
        else:
            recall[name] = 0.0
            undef_r.add(name)

    total = counts.sum()
    accuracy = float(np.trace(counts) / total) if total > 0 else 0.0
    return ConfusionMatrix(tuple(classes), counts, precision, recall, accuracy,
                           frozenset(undef_p), frozenset(undef_r))


def confusion_from_counts(classes: tuple[str, ...], counts) -> ConfusionMatrix:
    """Build the matrix directly from a counts table (row = actual)."""
    counts = np.asarray(counts, dtype=np.int64)
    y_true: list[str] = []
    y_pred: list[str] = []
    for i, actual in enumerate(classes):
        for j, predicted in enumerate(classes):
            y_true.extend([actual] * int(counts[i, j]))
            y_pred.extend([predicted] * int(counts[i, j]))
    return confusion(y_true, y_pred, classes)


def confusion_to_csv(matrix: ConfusionMatrix) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["actual\\predicted", *matrix.classes, "recall"])
    for i, name in enumerate(matrix.classes):
        writer.writerow([name, *matrix.counts[i].tolist(), repr(matrix.recall[name])])
    writer.writerow(["precision", *[repr(matrix.precision[c]) for c in matrix.classes],
                     repr(matrix.accuracy)])
    return buffer.getvalue()


def format_confusion_table(matrix: ConfusionMatrix) -> str:
    """Aligned plain-text rendering of the matrix with the summary metrics."""
    width = max(12, max(len(c) for c in matrix.classes) + 2)
    head = "".join(f"{c:>{width}}" for c in matrix.classes)
    lines = [f"{'actual':<{width}}{head}{'recall':>{width}}"]
    for i, name in enumerate(matrix.classes):
        cells = "".join(f"{int(v):>{width}}" for v in matrix.counts[i])
        lines.append(f"{name:<{width}}{cells}{matrix.recall[name]:>{width}.3f}")
    prec = "".join(f"{matrix.precision[c]:>{width}.3f}" for c in matrix.classes)
    lines.append(f"{'precision':<{width}}{prec}{matrix.accuracy:>{width}.4f}")
    return "\n".join(lines) + "\n"
