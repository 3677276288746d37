"""Deviation-report I/O, synthetic federations and alpha/seed sweeps.

CSV files are byte-for-byte reproducible: floats are written with ``repr`` and
the only timestamp lives in a ``.meta.json`` sidecar.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .baseline import DeviationReport, WeightScheme, build_deviation_report
from .metrics import LabeledPredictions, MetricSpec, Task
from .partitioning import SkewConfig, SkewKind, partition
from .predictors import (
    ConfusionKernel,
    NoisyRegressor,
    predict_classification,
    predict_regression,
)

SCHEMA_VERSION = 1

REPORT_FIELDS = [
    "metric",
    "scheme",
    "centralized",
    "weighted_average",
    "flam",
    "abs_dev_weighted",
    "abs_dev_flam",
    "participants",
    "sample_count",
    "local_values",
    "error",
]

SWEEP_FIELDS = [
    "skew",
    "alpha",
    "seed",
    "metric",
    "scheme",
    "centralized",
    "weighted",
    "flam",
    "deviation",
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def report_rows(report: DeviationReport) -> list[dict]:
    rows = []
    for r in report.rows:
        rows.append(
            {
                "metric": r.spec.name,
                "scheme": r.scheme.value,
                "centralized": r.centralized,
                "weighted_average": r.weighted_average,
                "flam": r.flam,
                "abs_dev_weighted": r.abs_dev_weighted,
                "abs_dev_flam": r.abs_dev_flam,
                "participants": report.participants,
                "sample_count": sum(report.sample_counts),
                "local_values": ";".join(f"{i}:{v!r}" for i, v in sorted(r.local_values.items())),
                "error": r.error,
            }
        )
    return rows


def write_csv(rows: Sequence[dict], fields: Sequence[str], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row.get(f)) for f in fields])


def write_rows(rows: Sequence[dict], fields: Sequence[str], csv_path, json_path=None, meta: dict | None = None) -> None:
    """Write ``rows`` as CSV (plus an optional JSON mirror and metadata sidecar)."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        write_csv(rows, fields, fh)
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump([{f: row.get(f) for f in fields} for row in rows], fh, indent=1)
            fh.write("\n")
    if meta is not None:
        sidecar = dict(meta, schema_version=SCHEMA_VERSION, created_unix=time.time())
        with open(str(csv_path) + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=1, sort_keys=True)
            fh.write("\n")


def write_report(report: DeviationReport, csv_path, json_path=None, meta: dict | None = None) -> None:
    write_rows(report_rows(report), REPORT_FIELDS, csv_path, json_path, meta)


def read_rows(path) -> list[dict]:
    """Read a report or sweep CSV; columns this version does not know are kept."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        return [dict(row) for row in reader]


@dataclass
class SyntheticConfig:
    """Everything needed to rebuild one synthetic federation from seeds."""

    task: Task = Task.CLASSIFICATION
    class_count: int = 10
    samples: int = 2000
    participants: int = 4
    kind: SkewKind = SkewKind.LS
    alpha_label: float | None = 0.6
    alpha_quantity: float | None = None
    shared_classes: frozenset[int] = field(default_factory=frozenset)
    accuracy: float = 0.7
    heterogeneous: bool = False
    accuracy_range: tuple[float, float] = (0.3, 0.95)
    noise_sigma: float = 0.5
    bias_range: float = 0.5

    def __post_init__(self):
        self.task = Task(self.task)
        self.kind = SkewKind.parse(self.kind)
        self.shared_classes = frozenset(self.shared_classes)

    def skew(self, seed: int) -> SkewConfig:
        return SkewConfig(
            kind=self.kind,
            participants=self.participants,
            seed=seed,
            alpha_quantity=self.alpha_quantity if self.kind in (SkewKind.QS, SkewKind.LQS) else None,
            alpha_label=self.alpha_label if self.kind in (SkewKind.LS, SkewKind.LQS) else None,
            shared_classes=self.shared_classes,
        )


def _subseed(*key: int) -> int:
    return int(np.random.SeedSequence([k & ((1 << 64) - 1) for k in key]).generate_state(1)[0])


def synthetic_federation(cfg: SyntheticConfig, seed: int) -> list[LabeledPredictions]:
    """Label pool, skewed partition and per-participant predictions for ``seed``.

    Regression pools are binned into ``class_count`` target quantiles so the
    label-based skews still apply.
    """
    rng = np.random.default_rng(_subseed(seed, 0))
    c = cfg.class_count
    if cfg.task is Task.CLASSIFICATION:
        labels = rng.integers(0, c, cfg.samples)
        targets = labels
    else:
        targets = rng.normal(0.0, 1.0, cfg.samples)
        edges = np.quantile(targets, np.linspace(0, 1, c + 1)[1:-1])
        labels = np.searchsorted(edges, targets)
    plan = partition(labels, cfg.skew(seed), class_count=c)
    parts = []
    for pid, idx in enumerate(plan.indices()):
        y = targets[idx]
        pseed = _subseed(seed, 1, pid)
        if cfg.task is Task.CLASSIFICATION:
            if cfg.heterogeneous:
                kernel = ConfusionKernel.random(c, cfg.accuracy_range, seed=pseed)
            else:
                kernel = ConfusionKernel.symmetric(c, cfg.accuracy, seed=pseed)
            parts.append(LabeledPredictions.classification(y, predict_classification(y, kernel), c))
        else:
            bias = 0.0
            if cfg.heterogeneous:
                bias = float(np.random.default_rng(pseed).uniform(-cfg.bias_range, cfg.bias_range))
            model = NoisyRegressor(bias, cfg.noise_sigma, pseed)
            parts.append(LabeledPredictions.regression(y, predict_regression(y, model)))
    return parts


def sweep(
    cfg: SyntheticConfig,
    alphas: Sequence[float | None],
    seeds: Sequence[int],
    specs: Sequence[MetricSpec],
    schemes: Sequence[WeightScheme] = (WeightScheme.SAMPLE_COUNT,),
) -> list[dict]:
    """One tidy row per (alpha, seed, metric, scheme).

    ``alphas`` override the label alpha for LS/LQS and the quantity alpha for
    QS; for IID and MS pass ``[None]``.
    """
    if not seeds:
        raise ValueError("a sweep needs at least one seed")
    rows = []
    for alpha in alphas:
        cell = _with_alpha(cfg, alpha)
        for seed in seeds:
            report = build_deviation_report(synthetic_federation(cell, seed), specs, schemes)
            for r in report.rows:
                rows.append(
                    {
                        "skew": cell.kind.value,
                        "alpha": alpha,
                        "seed": seed,
                        "metric": r.spec.name,
                        "scheme": r.scheme.value,
                        "centralized": r.centralized,
                        "weighted": r.weighted_average,
                        "flam": r.flam,
                        "deviation": r.abs_dev_weighted,
                    }
                )
    return rows


def _with_alpha(cfg: SyntheticConfig, alpha: float | None) -> SyntheticConfig:
    if alpha is None:
        return cfg
    if cfg.kind is SkewKind.QS:
        return replace(cfg, alpha_quantity=alpha)
    if cfg.kind in (SkewKind.LS, SkewKind.LQS):
        return replace(cfg, alpha_label=alpha)
    return cfg


def mean_deviation(rows: Iterable[dict], metric: str, alpha, scheme: str = "sample_count") -> float:
    devs = [
        r["deviation"]
        for r in rows
        if r["metric"] == metric and r["alpha"] == alpha and r["scheme"] == scheme
        and r["deviation"] is not None
    ]
    return float(np.mean(devs)) if devs else float("nan")
