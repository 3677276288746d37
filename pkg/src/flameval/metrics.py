"""Metric identities and the centralized (pooled-evidence) metric computations.

Every classification metric is assembled from a confusion matrix whose entries
are exact integers; floating point only enters when the final ratios are formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DegenerateVarianceError, LabelRangeError, UndefinedMetricError


class Task(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class MetricKind(str, Enum):
    ACCURACY = "accuracy"
    PRECISION = "precision"
    RECALL = "recall"
    F1 = "f1"
    MCC = "mcc"
    R2 = "r2"


class Averaging(str, Enum):
    MACRO = "macro"
    WEIGHTED = "weighted"
    NONE = "none"


class Mode(str, Enum):
    CENTRALIZED = "centralized"
    WEIGHTED_AVERAGE = "weighted_average"
    FLAM = "flam"


_AVERAGED = {MetricKind.PRECISION, MetricKind.RECALL, MetricKind.F1}


@dataclass(frozen=True)
class MetricSpec:
    kind: MetricKind
    averaging: Averaging = Averaging.NONE
    zero_division_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        object.__setattr__(self, "averaging", Averaging(self.averaging))
        object.__setattr__(self, "zero_division_value", float(self.zero_division_value))
        if self.kind in _AVERAGED:
            if self.averaging is Averaging.NONE:
                raise ValueError(f"{self.kind.value} needs macro or weighted averaging")
        elif self.averaging is not Averaging.NONE:
            raise ValueError(f"{self.kind.value} does not take an averaging mode")

    @property
    def task(self) -> Task:
        return Task.REGRESSION if self.kind is MetricKind.R2 else Task.CLASSIFICATION

    @property
    def name(self) -> str:
        if self.averaging is Averaging.NONE:
            return self.kind.value
        return f"{self.kind.value}-{self.averaging.value}"

    @classmethod
    def parse(cls, text: str, zero_division_value: float = 0.0) -> "MetricSpec":
        """Parse names such as ``accuracy``, ``f1-macro`` or ``precision_weighted``."""
        text = text.strip().lower().replace("_", "-")
        kind, _, avg = text.partition("-")
        return cls(MetricKind(kind), Averaging(avg or "none"), zero_division_value)

    def __str__(self) -> str:
        return self.name


def all_specs(task: Task | str = Task.CLASSIFICATION) -> list[MetricSpec]:
    """Every supported spec for a task, in a stable order."""
    if Task(task) is Task.REGRESSION:
        return [MetricSpec(MetricKind.R2)]
    specs = [MetricSpec(MetricKind.ACCURACY)]
    for kind in (MetricKind.PRECISION, MetricKind.RECALL, MetricKind.F1):
        for avg in (Averaging.MACRO, Averaging.WEIGHTED):
            specs.append(MetricSpec(kind, avg))
    specs.append(MetricSpec(MetricKind.MCC))
    return specs


@dataclass(frozen=True)
class MetricValue:
    spec: MetricSpec
    mode: Mode
    value: float
    sample_count: int


def _check_labels(labels: np.ndarray, class_count: int) -> None:
    bad = np.flatnonzero((labels < 0) | (labels >= class_count))
    if bad.size:
        i = int(bad[0])
        raise LabelRangeError(i, labels[i].item(), class_count)


def _as_labels(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if arr.dtype.kind == "f":
        if not np.all(np.mod(arr, 1) == 0):
            raise ValueError("classification labels must be integers")
    elif arr.dtype.kind not in "iu":
        raise ValueError(f"classification labels must be integers, got dtype {arr.dtype}")
    return arr.astype(np.int64)


@dataclass(frozen=True, eq=False)
class LabeledPredictions:
    """Paired ground truth and model outputs held by one participant."""

    task: Task
    y_true: np.ndarray
    y_pred: np.ndarray
    class_count: int | None = None

    def __post_init__(self):
        task = Task(self.task)
        object.__setattr__(self, "task", task)
        if task is Task.CLASSIFICATION:
            if self.class_count is None or int(self.class_count) < 1:
                raise ValueError("classification data needs a positive class_count")
            object.__setattr__(self, "class_count", int(self.class_count))
            yt, yp = _as_labels(self.y_true), _as_labels(self.y_pred)
        else:
            yt = np.array(self.y_true, dtype=np.float64).reshape(-1)
            yp = np.array(self.y_pred, dtype=np.float64).reshape(-1)
        if yt.ndim != 1 or yp.ndim != 1 or yt.shape != yp.shape:
            raise ValueError(
                f"y_true and y_pred must be 1-d and equally long ({yt.shape} vs {yp.shape})"
            )
        if task is Task.CLASSIFICATION:
            _check_labels(yt, self.class_count)
            _check_labels(yp, self.class_count)
        yt.setflags(write=False)
        yp.setflags(write=False)
        object.__setattr__(self, "y_true", yt)
        object.__setattr__(self, "y_pred", yp)

    @classmethod
    def classification(cls, y_true, y_pred, class_count: int) -> "LabeledPredictions":
        return cls(Task.CLASSIFICATION, y_true, y_pred, class_count)

    @classmethod
    def regression(cls, y_true, y_pred) -> "LabeledPredictions":
        return cls(Task.REGRESSION, y_true, y_pred)

    def __len__(self) -> int:
        return int(self.y_true.shape[0])

    def __eq__(self, other):
        if not isinstance(other, LabeledPredictions):
            return NotImplemented
        return (
            self.task is other.task
            and self.class_count == other.class_count
            and np.array_equal(self.y_true, other.y_true)
            and np.array_equal(self.y_pred, other.y_pred)
        )

    def subset(self, index) -> "LabeledPredictions":
        return LabeledPredictions(
            self.task, self.y_true[index], self.y_pred[index], self.class_count
        )


def concatenate(parts: Sequence[LabeledPredictions]) -> LabeledPredictions:
    """Concatenate participant datasets into the pooled dataset."""
    if not parts:
        raise ValueError("nothing to concatenate")
    first = parts[0]
    for p in parts[1:]:
        if p.task is not first.task or p.class_count != first.class_count:
            raise ValueError("partitions disagree on task or class count")
    return LabeledPredictions(
        first.task,
        np.concatenate([p.y_true for p in parts]),
        np.concatenate([p.y_pred for p in parts]),
        first.class_count,
    )


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """C x C count table; rows are true classes, columns predicted classes."""

    counts: np.ndarray = field(repr=True)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or counts.shape[0] < 1:
            raise ValueError(f"confusion matrix must be square, got shape {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion matrix entries must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def zeros(cls, class_count: int) -> "ConfusionMatrix":
        return cls(np.zeros((class_count, class_count), dtype=np.int64))

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def tp(self) -> np.ndarray:
        return np.diag(self.counts).copy()

    @property
    def support(self) -> np.ndarray:
        """Samples per true class (TP + FN)."""
        return self.counts.sum(axis=1)

    @property
    def predicted(self) -> np.ndarray:
        """Samples per predicted class (TP + FP)."""
        return self.counts.sum(axis=0)

    @property
    def fp(self) -> np.ndarray:
        return self.predicted - self.tp

    @property
    def fn(self) -> np.ndarray:
        return self.support - self.tp

    @property
    def tn(self) -> np.ndarray:
        return self.n - self.tp - self.fp - self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        if other.class_count != self.class_count:
            raise ValueError("cannot add confusion matrices with different class counts")
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def tolist(self) -> list[list[int]]:
        return self.counts.tolist()


def confusion_from_labels(data: LabeledPredictions) -> ConfusionMatrix:
    if data.task is not Task.CLASSIFICATION:
        raise ValueError("confusion matrix needs classification data")
    c = data.class_count
    _check_labels(data.y_true, c)
    _check_labels(data.y_pred, c)
    flat = np.bincount(data.y_true * c + data.y_pred, minlength=c * c)
    return ConfusionMatrix(flat.reshape(c, c))


def _ratio(num: int, den: int, zero_division: float) -> float:
    return num / den if den else zero_division


def per_class_scores(cm: ConfusionMatrix, kind: MetricKind, zero_division: float = 0.0) -> list[float]:
    """Per-class precision, recall or F1 with the zero-division policy applied."""
    tp = cm.tp.tolist()
    fp = cm.fp.tolist()
    fn = cm.fn.tolist()
    if kind is MetricKind.PRECISION:
        return [_ratio(a, a + b, zero_division) for a, b in zip(tp, fp)]
    if kind is MetricKind.RECALL:
        return [_ratio(a, a + b, zero_division) for a, b in zip(tp, fn)]
    if kind is MetricKind.F1:
        return [_ratio(2 * a, 2 * a + b + d, zero_division) for a, b, d in zip(tp, fp, fn)]
    raise ValueError(f"{kind.value} has no per-class form")


def matthews_from_confusion(cm: ConfusionMatrix) -> float:
    """Multiclass MCC (the R_K statistic); 0.0 when the denominator vanishes."""
    n = cm.n
    tp_total = int(np.trace(cm.counts))
    p = cm.predicted.tolist()
    t = cm.support.tolist()
    cov = n * tp_total - sum(a * b for a, b in zip(p, t))
    var_p = n * n - sum(a * a for a in p)
    var_t = n * n - sum(b * b for b in t)
    if var_p == 0 or var_t == 0:
        return 0.0
    prod = var_p * var_t
    root = math.isqrt(prod)
    value = cov / root if root * root == prod else cov / math.sqrt(prod)
    return min(1.0, max(-1.0, value))


def score_confusion(cm: ConfusionMatrix, spec: MetricSpec) -> float:
    if spec.kind is MetricKind.R2:
        raise ValueError("r2 cannot be computed from a confusion matrix")
    n = cm.n
    if n == 0:
        raise UndefinedMetricError(f"{spec.name} is undefined on zero samples")
    if spec.kind is MetricKind.ACCURACY:
        return int(np.trace(cm.counts)) / n
    if spec.kind is MetricKind.MCC:
        return matthews_from_confusion(cm)
    scores = per_class_scores(cm, spec.kind, spec.zero_division_value)
    if spec.averaging is Averaging.MACRO:
        return math.fsum(scores) / cm.class_count
    support = cm.support.tolist()
    return math.fsum(w * s for w, s in zip(support, scores)) / n


def metric_from_confusion(
    cm: ConfusionMatrix, spec: MetricSpec, mode: Mode = Mode.CENTRALIZED
) -> MetricValue:
    return MetricValue(spec, Mode(mode), score_confusion(cm, spec), cm.n)


def r2_parts(y_true: np.ndarray, y_pred: np.ndarray, mean: float) -> tuple[float, float]:
    """Residual and total sums of squares around a given target mean."""
    ss_res = math.fsum(np.square(y_true - y_pred).tolist())
    ss_tot = math.fsum(np.square(y_true - mean).tolist())
    return ss_res, ss_tot


def r2_from_sums(ss_res: float, ss_tot: float) -> float:
    if ss_tot == 0:
        raise DegenerateVarianceError("r2 is undefined when all targets are equal")
    return 1.0 - ss_res / ss_tot


def target_mean(y_true: np.ndarray) -> float:
    if len(y_true) == 0:
        raise UndefinedMetricError("mean of an empty target vector")
    return math.fsum(np.asarray(y_true, dtype=np.float64).tolist()) / len(y_true)


def evaluate_centralized(data: LabeledPredictions, spec: MetricSpec) -> MetricValue:
    """Compute ``spec`` over the full pooled dataset."""
    if spec.task is not data.task:
        raise ValueError(f"{spec.name} does not apply to {data.task.value} data")
    if len(data) == 0:
        raise UndefinedMetricError(f"{spec.name} is undefined on zero samples")
    if data.task is Task.CLASSIFICATION:
        return metric_from_confusion(confusion_from_labels(data), spec)
    ss_res, ss_tot = r2_parts(data.y_true, data.y_pred, target_mean(data.y_true))
    return MetricValue(spec, Mode.CENTRALIZED, r2_from_sums(ss_res, ss_tot), len(data))
