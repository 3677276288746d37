"""Synthetic stand-ins for a trained global model, and prediction file I/O.

Only the ``(y_true, y_pred)`` pairs matter to every evaluation mode, so a
row-stochastic confusion kernel (classification) or a biased noisy copy of the
target (regression) is enough to exercise them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FlamError, ParseError
from .metrics import LabeledPredictions, Task

HEADER = ["participant_id", "y_true", "y_pred"]


@dataclass(frozen=True, eq=False)
class ConfusionKernel:
    kernel: np.ndarray
    seed: int = 0

    def __post_init__(self):
        k = np.array(self.kernel, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError(f"kernel must be square, got shape {k.shape}")
        if (k < 0).any() or not np.allclose(k.sum(axis=1), 1.0, rtol=0, atol=1e-9):
            raise ValueError("kernel rows must be non-negative and sum to 1")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)

    @property
    def class_count(self) -> int:
        return self.kernel.shape[0]

    @classmethod
    def identity(cls, class_count: int, seed: int = 0) -> "ConfusionKernel":
        return cls(np.eye(class_count), seed)

    @classmethod
    def symmetric(cls, class_count: int, accuracy: float, seed: int = 0) -> "ConfusionKernel":
        """Correct with probability ``accuracy``, otherwise uniform over the other classes."""
        if class_count == 1:
            return cls(np.ones((1, 1)), seed)
        off = (1.0 - accuracy) / (class_count - 1)
        k = np.full((class_count, class_count), off)
        np.fill_diagonal(k, accuracy)
        return cls(k, seed)

    @classmethod
    def random(cls, class_count: int, accuracy: tuple[float, float], concentration: float = 1.0,
               seed: int = 0) -> "ConfusionKernel":
        """Per-class accuracy drawn uniformly from ``accuracy``; errors spread by a Dirichlet draw."""
        rng = np.random.default_rng([seed, class_count])
        k = np.zeros((class_count, class_count))
        for j in range(class_count):
            acc = rng.uniform(*accuracy)
            if class_count == 1:
                k[j, j] = 1.0
                continue
            err = rng.dirichlet(np.full(class_count - 1, concentration)) * (1.0 - acc)
            k[j] = np.insert(err, j, acc)
        k /= k.sum(axis=1, keepdims=True)
        return cls(k, seed)


@dataclass(frozen=True)
class NoisyRegressor:
    bias: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def predict_classification(labels: Sequence[int], kernel: ConfusionKernel) -> np.ndarray:
    """Sample each prediction from the kernel row of its true label."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= kernel.class_count):
        raise ValueError(f"labels must lie in [0, {kernel.class_count})")
    rng = np.random.default_rng(kernel.seed)
    u = rng.random(labels.size)
    cdf = np.cumsum(kernel.kernel, axis=1)
    cdf[:, -1] = 1.0
    pred = (u[:, None] >= cdf[labels]).sum(axis=1)
    return np.minimum(pred, kernel.class_count - 1)


def predict_regression(y_true: Sequence[float], model: NoisyRegressor) -> np.ndarray:
    y = np.asarray(y_true, dtype=np.float64)
    rng = np.random.default_rng(model.seed)
    noise = rng.normal(0.0, model.noise_sigma, y.size) if model.noise_sigma else 0.0
    return y + model.bias + noise


def _parse_label(text: str, lineno: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"not an integer label: {text!r}", lineno) from None


def _parse_real(text: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", lineno) from None


def ingest_predictions(
    path: str | Path, task: Task | str, class_count: int | None = None
) -> list[LabeledPredictions]:
    """Read ``participant_id,y_true,y_pred`` rows into one dataset per participant.

    The header line is optional. Participants are returned in ascending id order.
    For classification without ``class_count`` the count is inferred as
    ``max label + 1``.
    """
    task = Task(task)
    rows: dict[int, tuple[list, list]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and [c.strip() for c in row] == HEADER:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
            try:
                pid = int(row[0])
            except ValueError:
                raise ParseError(f"participant id must be an integer: {row[0]!r}", lineno) from None
            if task is Task.CLASSIFICATION:
                yt, yp = _parse_label(row[1], lineno), _parse_label(row[2], lineno)
            else:
                yt, yp = _parse_real(row[1], lineno), _parse_real(row[2], lineno)
            bucket = rows.setdefault(pid, ([], []))
            bucket[0].append(yt)
            bucket[1].append(yp)
    if not rows:
        raise FlamError(f"{path}: empty federation (no prediction rows)")
    if task is Task.CLASSIFICATION and class_count is None:
        class_count = 1 + max(max(max(t, default=0), max(p, default=0)) for t, p in rows.values())
    if task is Task.REGRESSION:
        class_count = None
    return [
        LabeledPredictions(
            task,
            np.asarray(rows[pid][0], dtype=np.int64 if task is Task.CLASSIFICATION else np.float64),
            np.asarray(rows[pid][1], dtype=np.int64 if task is Task.CLASSIFICATION else np.float64),
            class_count,
        )
        for pid in sorted(rows)
    ]


def emit_predictions(partitions: Sequence[LabeledPredictions], path: str | Path) -> None:
    """Write a federation in the format read by :func:`ingest_predictions`.

    Floats use ``repr`` so values survive the round trip bit for bit. Empty
    participants have no rows and therefore do not survive it.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for pid, part in enumerate(partitions):
            for yt, yp in zip(part.y_true.tolist(), part.y_pred.tolist()):
                w.writerow([pid, repr(yt), repr(yp)])
