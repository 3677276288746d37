import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import classification_data, spec, split
from flameval import (
    LabeledPredictions,
    Mode,
    UndefinedMetricError,
    WeightScheme,
    all_specs,
    build_deviation_report,
    concatenate,
    evaluate_centralized,
    local_metrics,
    weighted_average_evaluate,
)
from flameval.baseline import scheme_weights


def test_local_metric_examples(running_example):
    f1 = dict((i, v.value) for i, v in local_metrics(running_example, spec("f1-macro")))
    assert f1[0] == pytest.approx(3 / 7, abs=1e-12)
    assert f1[1] == pytest.approx(0.5, abs=1e-12)
    acc = dict((i, v.value) for i, v in local_metrics(running_example, spec("accuracy")))
    assert acc[0] == 0.75


def test_local_metrics_skip_empty(running_example):
    parts = running_example + [LabeledPredictions.classification([], [], 2)]
    assert [i for i, _ in local_metrics(parts, spec("accuracy"))] == [0, 1]


def test_weighted_average_examples(running_example, regression_example):
    v = weighted_average_evaluate(running_example, spec("f1-macro"))
    assert v.mode is Mode.WEIGHTED_AVERAGE
    assert v.value == pytest.approx((4 / 6) * (3 / 7) + (2 / 6) * 0.5, abs=1e-12)
    assert weighted_average_evaluate(running_example, spec("accuracy")).value == pytest.approx(5 / 6, abs=1e-12)
    assert weighted_average_evaluate(regression_example, spec("r2")).value == pytest.approx(-1.0, abs=1e-12)


def test_weighted_average_all_empty():
    empty = LabeledPredictions.classification([], [], 2)
    with pytest.raises(UndefinedMetricError):
        weighted_average_evaluate([empty, empty], spec("accuracy"))


def test_scheme_weights():
    assert scheme_weights([1, 3], WeightScheme.SAMPLE_COUNT) == [0.25, 0.75]
    assert scheme_weights([1, 3], WeightScheme.UNIFORM) == [0.5, 0.5]


@given(st.lists(st.integers(1, 10_000), min_size=1, max_size=20), st.sampled_from(list(WeightScheme)))
def test_weights_normalised(sizes, scheme):
    w = scheme_weights(sizes, scheme)
    assert all(x >= 0 for x in w)
    assert abs(sum(w) - 1.0) <= 1e-12


def test_deviation_report_example(running_example):
    report = build_deviation_report(running_example, [spec("accuracy"), spec("f1-macro")])
    acc, f1 = report.row("accuracy"), report.row("f1-macro")
    assert acc.abs_dev_weighted == pytest.approx(0.0, abs=1e-12)
    assert f1.abs_dev_weighted == pytest.approx(0.8285714285714285 - 0.4523809523809524, abs=1e-12)
    assert round(f1.abs_dev_weighted, 3) == 0.376
    assert acc.abs_dev_flam == 0.0 and f1.abs_dev_flam == 0.0
    assert f1.local_values == pytest.approx({0: 3 / 7, 1: 0.5})


def test_report_single_participant_has_no_deviation():
    data = LabeledPredictions.classification([0, 1, 2, 2, 1, 0], [0, 2, 2, 1, 1, 0], 3)
    report = build_deviation_report([data], all_specs(), list(WeightScheme))
    for row in report.rows:
        assert row.abs_dev_weighted == 0.0
        assert row.abs_dev_flam == 0.0


def test_report_identical_partitions_have_no_deviation():
    data = LabeledPredictions.classification([0, 1, 2, 2, 1, 0, 2], [0, 2, 2, 1, 1, 0, 0], 3)
    report = build_deviation_report([data, data, data], all_specs(), list(WeightScheme))
    for row in report.rows:
        assert row.abs_dev_weighted <= 1e-12


def test_report_records_degenerate_metrics(regression_example):
    # a single-sample participant has zero local variance
    parts = regression_example + [LabeledPredictions.regression([5.0], [4.0])]
    report = build_deviation_report(parts, [spec("r2")])
    row = report.row("r2")
    assert row.weighted_average is None
    assert "DegenerateVarianceError" in row.error
    assert row.flam == pytest.approx(row.centralized, abs=1e-12)


@given(st.data())
def test_sample_count_weighting_preserves_accuracy_and_weighted_recall(d):
    data = d.draw(classification_data(min_size=1))
    parts = d.draw(split(data, max_parts=8))
    for name in ["accuracy", "recall-weighted"]:
        want = evaluate_centralized(data, spec(name)).value
        got = weighted_average_evaluate(parts, spec(name), WeightScheme.SAMPLE_COUNT).value
        assert abs(got - want) <= 1e-12


@given(classification_data(min_size=1))
def test_single_participant_all_modes_agree(data):
    report = build_deviation_report([data], all_specs(), list(WeightScheme))
    for row in report.rows:
        assert row.centralized == row.weighted_average == row.flam


@given(st.data())
def test_uniform_equals_sample_count_for_equal_sizes(d):
    c = d.draw(st.integers(2, 5))
    p = d.draw(st.integers(1, 5))
    size = d.draw(st.integers(1, 20))
    parts = []
    for _ in range(p):
        yt = d.draw(st.lists(st.integers(0, c - 1), min_size=size, max_size=size))
        yp = d.draw(st.lists(st.integers(0, c - 1), min_size=size, max_size=size))
        parts.append(LabeledPredictions.classification(yt, yp, c))
    for s in all_specs():
        a = weighted_average_evaluate(parts, s, WeightScheme.UNIFORM).value
        b = weighted_average_evaluate(parts, s, WeightScheme.SAMPLE_COUNT).value
        assert a == pytest.approx(b, abs=1e-12)


@given(st.data())
def test_flam_never_deviates(d):
    data = d.draw(classification_data(min_size=1))
    parts = d.draw(split(data, max_parts=8))
    report = build_deviation_report(parts, all_specs(), list(WeightScheme))
    assert report.max_flam_deviation() <= 1e-9


def test_macro_f1_is_not_preserved_in_general(running_example):
    pooled = concatenate(running_example)
    assert weighted_average_evaluate(running_example, spec("f1-macro")).value != pytest.approx(
        evaluate_centralized(pooled, spec("f1-macro")).value
    )
