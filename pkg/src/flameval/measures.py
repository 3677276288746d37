"""Aggregatable measures (AMs): per-participant quantities whose sum over the
federation equals the same quantity on the pooled data.

Participants compute AMs on local data, the coordinator sums them and turns the
sum into the metric. Because nothing local-scale-dependent survives the sum,
the result equals centralized evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Union

import numpy as np

from .errors import ShapeError, UndefinedMetricError
from .metrics import (
    ConfusionMatrix,
    LabeledPredictions,
    MetricKind,
    MetricSpec,
    MetricValue,
    Mode,
    Task,
    confusion_from_labels,
    r2_from_sums,
    r2_parts,
    score_confusion,
)

GLOBAL_MEAN = "global_mean"


@dataclass(frozen=True)
class ClassificationAM:
    confusion: ConfusionMatrix

    @property
    def n(self) -> int:
        return self.confusion.n

    @property
    def class_count(self) -> int:
        return self.confusion.class_count

    # Minimal per-class tuples of the F1 decomposition; all are views of the table.
    def f1_fp_plus_fn(self) -> np.ndarray:
        return self.confusion.fp + self.confusion.fn

    def f1_tp(self) -> np.ndarray:
        return self.confusion.tp

    def class_weights(self) -> np.ndarray:
        """Samples per true class, the weights of the weighted averages."""
        return self.confusion.support

    def __add__(self, other):
        if not isinstance(other, ClassificationAM):
            return NotImplemented
        if other.class_count != self.class_count:
            raise ShapeError(
                f"class counts differ: {self.class_count} vs {other.class_count}"
            )
        return ClassificationAM(self.confusion + other.confusion)


@dataclass(frozen=True)
class RegressionAM:
    """Residual sum of squares and total sum of squares around the global mean."""

    rs_a: float
    rs_b: float
    n: int
    global_mean: float

    def __post_init__(self):
        if self.rs_a < 0 or self.rs_b < 0:
            raise ValueError("sums of squares must be non-negative")


@dataclass(frozen=True)
class MeanStatistic:
    sum_y: float
    count: int

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise UndefinedMetricError("global mean over zero samples")
        return self.sum_y / self.count


AM = Union[ClassificationAM, RegressionAM]


@dataclass(frozen=True)
class StatisticPlan:
    phases: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.phases)


def statistic_plan(spec: MetricSpec) -> StatisticPlan:
    """Global statistics that must be known before ``spec``'s AMs can be computed."""
    if spec.kind is MetricKind.R2:
        return StatisticPlan((GLOBAL_MEAN,))
    return StatisticPlan()


def combined_plan(specs: Sequence[MetricSpec]) -> StatisticPlan:
    phases: list[str] = []
    for spec in specs:
        for p in statistic_plan(spec).phases:
            if p not in phases:
                phases.append(p)
    return StatisticPlan(tuple(phases))


def compute_mean_statistic(data: LabeledPredictions) -> MeanStatistic:
    return MeanStatistic(math.fsum(data.y_true.tolist()), len(data))


def aggregate_mean_statistics(stats: Sequence[MeanStatistic]) -> MeanStatistic:
    if not stats:
        raise ShapeError("no statistics to aggregate")
    return MeanStatistic(math.fsum(s.sum_y for s in stats), sum(s.count for s in stats))


def compute_classification_am(data: LabeledPredictions) -> ClassificationAM:
    return ClassificationAM(confusion_from_labels(data))


def compute_regression_am(data: LabeledPredictions, global_mean: float) -> RegressionAM:
    if data.task is not Task.REGRESSION:
        raise ValueError("regression AM needs regression data")
    rs_a, rs_b = r2_parts(data.y_true, data.y_pred, global_mean)
    return RegressionAM(rs_a, rs_b, len(data), float(global_mean))


def compute_am(data: LabeledPredictions, statistics: dict | None = None) -> AM:
    if data.task is Task.CLASSIFICATION:
        return compute_classification_am(data)
    if not statistics or GLOBAL_MEAN not in statistics:
        raise ValueError("regression AMs need the global mean")
    return compute_regression_am(data, statistics[GLOBAL_MEAN])


def aggregate_ams(ams: Sequence[AM]) -> AM:
    """Componentwise sum of AMs; integer parts exactly, floats compensated."""
    if not ams:
        raise ShapeError("no AMs to aggregate")
    kinds = {type(a) for a in ams}
    if len(kinds) != 1:
        raise ShapeError(f"cannot mix AM variants: {sorted(k.__name__ for k in kinds)}")
    if isinstance(ams[0], ClassificationAM):
        return reduce(lambda a, b: a + b, ams)
    means = {a.global_mean for a in ams}
    if len(means) != 1:
        raise ShapeError("regression AMs were computed against different global means")
    return RegressionAM(
        math.fsum(a.rs_a for a in ams),
        math.fsum(a.rs_b for a in ams),
        sum(a.n for a in ams),
        ams[0].global_mean,
    )


def metric_from_am(am: AM, spec: MetricSpec) -> MetricValue:
    if isinstance(am, ClassificationAM):
        if spec.task is not Task.CLASSIFICATION:
            raise ValueError(f"{spec.name} cannot be computed from a classification AM")
        return MetricValue(spec, Mode.FLAM, score_confusion(am.confusion, spec), am.n)
    if spec.kind is not MetricKind.R2:
        raise ValueError(f"{spec.name} cannot be computed from a regression AM")
    if am.n == 0:
        raise UndefinedMetricError("r2 is undefined on zero samples")
    return MetricValue(spec, Mode.FLAM, r2_from_sums(am.rs_a, am.rs_b), am.n)


def _check_federation(partitions: Sequence[LabeledPredictions]) -> None:
    if not partitions:
        raise ValueError("a federation needs at least one partition")
    first = partitions[0]
    for p in partitions[1:]:
        if p.task is not first.task or p.class_count != first.class_count:
            raise ShapeError("partitions disagree on task or class count")


def gather_statistics(partitions: Sequence[LabeledPredictions], plan: StatisticPlan) -> dict:
    stats: dict[str, float] = {}
    for phase in plan.phases:
        if phase == GLOBAL_MEAN:
            total = aggregate_mean_statistics([compute_mean_statistic(p) for p in partitions])
            stats[GLOBAL_MEAN] = total.mean
        else:
            raise ValueError(f"unknown statistic {phase!r}")
    return stats


def flam_evaluate(partitions: Sequence[LabeledPredictions], spec: MetricSpec) -> MetricValue:
    """Evaluate ``spec`` over a federation by exchanging only AMs."""
    _check_federation(partitions)
    if spec.task is not partitions[0].task:
        raise ValueError(f"{spec.name} does not apply to {partitions[0].task.value} data")
    stats = gather_statistics(partitions, statistic_plan(spec))
    total = aggregate_ams([compute_am(p, stats) for p in partitions])
    return metric_from_am(total, spec)
