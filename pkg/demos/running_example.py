"""
Why averaging local metrics goes wrong
======================================

Two participants share one classifier. The first holds four class-0 samples
and gets one wrong; the second holds two class-1 samples and gets both right.
"""

from flameval import (
    LabeledPredictions,
    MetricSpec,
    build_deviation_report,
    compute_classification_am,
)

parts = [
    LabeledPredictions.classification([0, 0, 0, 0], [0, 0, 0, 1], 2),
    LabeledPredictions.classification([1, 1], [1, 1], 2),
]

# Each participant only ships its confusion matrix. Summing them gives the
# matrix the coordinator would have built from the pooled data.
for i, p in enumerate(parts):
    print(f"participant {i}:", compute_classification_am(p).confusion.tolist())

# Accuracy survives sample-count averaging; macro F1 does not.
specs = [MetricSpec.parse(n) for n in ("accuracy", "f1-macro", "mcc")]
report = build_deviation_report(parts, specs)
print()
print(f"{'metric':<10}{'pooled':>10}{'averaged':>10}{'flam':>10}")
for row in report.rows:
    print(f"{row.spec.name:<10}{row.centralized:>10.4f}{row.weighted_average:>10.4f}{row.flam:>10.4f}")

# The averaged macro F1 is off by about 0.376 while the aggregated value is
# identical to the pooled one.
print()
print("macro F1 gap of the average:", round(report.row("f1-macro").abs_dev_weighted, 3))

# Regression has the same problem. R^2 needs the global target mean first,
# which the participants compute together as (sum, count) pairs.
reg = [
    LabeledPredictions.regression([1, 2], [1, 2]),
    LabeledPredictions.regression([3, 4], [4, 3]),
]
row = build_deviation_report(reg, [MetricSpec.parse("r2")]).row("r2")
print(f"r2: pooled {row.centralized:.3f}, averaged {row.weighted_average:.3f}, flam {row.flam:.3f}")
