import json

import numpy as np
import pytest

from conftest import spec
from flameval import SkewKind, Task, build_deviation_report
from flameval.report import (
    REPORT_FIELDS,
    SWEEP_FIELDS,
    SyntheticConfig,
    mean_deviation,
    read_rows,
    report_rows,
    sweep,
    synthetic_federation,
    write_report,
    write_rows,
)


def test_config_coerces_strings():
    cfg = SyntheticConfig(task="regression", kind="lqs", alpha_quantity=2.0, shared_classes=[1])
    assert cfg.task is Task.REGRESSION
    assert cfg.kind is SkewKind.LQS
    assert cfg.shared_classes == frozenset({1})
    assert all(p.task is Task.REGRESSION for p in synthetic_federation(cfg, 0))


@pytest.mark.parametrize("task", ["classification", "regression"])
def test_synthetic_federation_is_seeded(task):
    cfg = SyntheticConfig(task=task, samples=300)
    a, b = synthetic_federation(cfg, 4), synthetic_federation(cfg, 4)
    assert a == b
    assert sum(len(p) for p in a) == 300
    assert a != synthetic_federation(cfg, 5)


def test_heterogeneous_predictors_differ_per_participant():
    cfg = SyntheticConfig(kind=SkewKind.IID, samples=4000, heterogeneous=True)
    recalls = []
    for p in synthetic_federation(cfg, 1):
        recalls.append([np.mean(p.y_pred[p.y_true == c] == c) for c in range(10)])
    spread = np.ptp(np.array(recalls), axis=0)
    assert spread.max() > 0.2


def test_report_round_trip_and_sidecar(tmp_path, running_example):
    report = build_deviation_report(running_example, [spec("accuracy"), spec("f1-macro")])
    csv_path, json_path = tmp_path / "r.csv", tmp_path / "r.json"
    write_report(report, csv_path, json_path, meta={"note": "x"})
    rows = read_rows(csv_path)
    assert list(rows[0]) == REPORT_FIELDS
    assert float(rows[1]["flam"]) == report_rows(report)[1]["flam"]
    mirror = json.loads(json_path.read_text())
    assert [set(r) for r in mirror] == [set(REPORT_FIELDS)] * 2
    meta = json.loads((tmp_path / "r.csv.meta.json").read_text())
    assert meta["schema_version"] == 1 and "created_unix" in meta


def test_unknown_columns_survive_reading(tmp_path):
    path = tmp_path / "future.csv"
    path.write_text("metric,flam,extra_col\naccuracy,0.5,hello\n")
    assert read_rows(path) == [{"metric": "accuracy", "flam": "0.5", "extra_col": "hello"}]


def test_empty_file_reads_as_no_rows(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert read_rows(path) == []


def test_sweep_shape_and_determinism(tmp_path):
    cfg = SyntheticConfig(samples=400)
    rows = sweep(cfg, [0.6, 7.0], [0, 1, 2], [spec("f1-macro"), spec("accuracy")])
    assert len(rows) == 2 * 3 * 2
    assert set(rows[0]) == set(SWEEP_FIELDS)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_rows(rows, SWEEP_FIELDS, a)
    write_rows(sweep(cfg, [0.6, 7.0], [0, 1, 2], [spec("f1-macro"), spec("accuracy")]), SWEEP_FIELDS, b)
    assert a.read_bytes() == b.read_bytes()


def test_sweep_needs_seeds():
    with pytest.raises(ValueError):
        sweep(SyntheticConfig(), [0.6], [], [spec("accuracy")])


def test_mean_deviation():
    rows = [
        {"metric": "f1-macro", "alpha": 0.6, "scheme": "sample_count", "deviation": 0.2},
        {"metric": "f1-macro", "alpha": 0.6, "scheme": "sample_count", "deviation": 0.4},
        {"metric": "f1-macro", "alpha": 7.0, "scheme": "sample_count", "deviation": 0.1},
        {"metric": "f1-macro", "alpha": 0.6, "scheme": "uniform", "deviation": 9.0},
    ]
    assert mean_deviation(rows, "f1-macro", 0.6) == pytest.approx(0.3)
    assert np.isnan(mean_deviation(rows, "accuracy", 0.6))
