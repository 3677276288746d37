"""Participant-based weighted-average evaluation and its deviation from the pooled result."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import FlamError, UndefinedMetricError
from .measures import _check_federation, flam_evaluate
from .metrics import (
    LabeledPredictions,
    MetricSpec,
    MetricValue,
    Mode,
    concatenate,
    evaluate_centralized,
)

logger = logging.getLogger(__name__)


class WeightScheme(str, Enum):
    SAMPLE_COUNT = "sample_count"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, text: str) -> "WeightScheme":
        return cls(text.strip().lower().replace("-", "_"))


def scheme_weights(sizes: Sequence[int], scheme: WeightScheme) -> list[float]:
    """Normalised participant weights; empty participants must already be removed."""
    scheme = WeightScheme(scheme)
    if not sizes:
        raise UndefinedMetricError("no non-empty participants to weight")
    if scheme is WeightScheme.UNIFORM:
        return [1.0 / len(sizes)] * len(sizes)
    total = sum(sizes)
    return [s / total for s in sizes]


def local_metrics(
    partitions: Sequence[LabeledPredictions], spec: MetricSpec
) -> list[tuple[int, MetricValue]]:
    """Per-participant metric values as ``(participant index, value)`` pairs.

    Empty partitions are skipped. Each local value uses the federation's class
    count, so macro denominators agree with the pooled computation.
    """
    _check_federation(partitions)
    out = []
    for i, part in enumerate(partitions):
        if len(part) == 0:
            logger.info("skipping empty participant %d for %s", i, spec.name)
            continue
        out.append((i, evaluate_centralized(part, spec)))
    return out


def weighted_average_evaluate(
    partitions: Sequence[LabeledPredictions],
    spec: MetricSpec,
    scheme: WeightScheme = WeightScheme.SAMPLE_COUNT,
) -> MetricValue:
    local = local_metrics(partitions, spec)
    if not local:
        raise UndefinedMetricError("every participant is empty")
    weights = scheme_weights([v.sample_count for _, v in local], scheme)
    value = math.fsum(w * v.value for w, (_, v) in zip(weights, local))
    return MetricValue(spec, Mode.WEIGHTED_AVERAGE, value, sum(v.sample_count for _, v in local))


@dataclass
class DeviationRow:
    spec: MetricSpec
    scheme: WeightScheme
    centralized: float | None = None
    weighted_average: float | None = None
    flam: float | None = None
    local_values: dict[int, float] = field(default_factory=dict)
    error: str | None = None

    @property
    def abs_dev_weighted(self) -> float | None:
        if self.centralized is None or self.weighted_average is None:
            return None
        return abs(self.weighted_average - self.centralized)

    @property
    def abs_dev_flam(self) -> float | None:
        if self.centralized is None or self.flam is None:
            return None
        return abs(self.flam - self.centralized)


@dataclass
class DeviationReport:
    rows: list[DeviationRow]
    participants: int
    sample_counts: list[int]

    def row(self, spec: MetricSpec | str, scheme: WeightScheme | str = WeightScheme.SAMPLE_COUNT) -> DeviationRow:
        name = spec if isinstance(spec, str) else spec.name
        scheme = WeightScheme.parse(scheme) if isinstance(scheme, str) else scheme
        for r in self.rows:
            if r.spec.name == name and r.scheme is scheme:
                return r
        raise KeyError((name, scheme))

    def max_flam_deviation(self) -> float:
        devs = [r.abs_dev_flam for r in self.rows if r.abs_dev_flam is not None]
        return max(devs, default=0.0)


def _try(fn, *args):
    try:
        return fn(*args), None
    except FlamError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def build_deviation_report(
    partitions: Sequence[LabeledPredictions],
    specs: Sequence[MetricSpec],
    schemes: Sequence[WeightScheme] = (WeightScheme.SAMPLE_COUNT,),
) -> DeviationReport:
    """Run the centralized, weighted-average and FLAM modes for every spec/scheme pair.

    Metric failures (degenerate variance, empty data) are recorded on the row
    instead of aborting the report.
    """
    _check_federation(partitions)
    pooled = concatenate(list(partitions))
    rows = []
    for spec in specs:
        central, err_c = _try(evaluate_centralized, pooled, spec)
        flam, err_f = _try(flam_evaluate, partitions, spec)
        local, err_l = _try(local_metrics, partitions, spec)
        for scheme in schemes:
            scheme = WeightScheme(scheme)
            weighted, err_w = _try(weighted_average_evaluate, partitions, spec, scheme)
            errors = [e for e in (err_c, err_f, err_l, err_w) if e]
            rows.append(
                DeviationRow(
                    spec=spec,
                    scheme=scheme,
                    centralized=central.value if central else None,
                    weighted_average=weighted.value if weighted else None,
                    flam=flam.value if flam else None,
                    local_values={i: v.value for i, v in local} if local else {},
                    error="; ".join(dict.fromkeys(errors)) or None,
                )
            )
    return DeviationReport(rows, len(partitions), [len(p) for p in partitions])
