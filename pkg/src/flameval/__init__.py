"""Federated model evaluation with aggregatable measures.

Participants send additive measures (confusion matrices, residual sums)
instead of locally computed metric values, so the coordinator reproduces the
centralized result exactly. The weighted-average baseline is provided for
comparison.
"""

from .baseline import (
    DeviationReport,
    DeviationRow,
    WeightScheme,
    build_deviation_report,
    local_metrics,
    weighted_average_evaluate,
)
from .errors import (
    DegenerateVarianceError,
    FlamError,
    InfeasiblePartitionError,
    LabelRangeError,
    ParseError,
    ProtocolError,
    RoundTimeoutError,
    ShapeError,
    UndefinedMetricError,
)
from .measures import (
    ClassificationAM,
    MeanStatistic,
    RegressionAM,
    StatisticPlan,
    aggregate_ams,
    compute_classification_am,
    compute_regression_am,
    flam_evaluate,
    metric_from_am,
    statistic_plan,
)
from .metrics import (
    Averaging,
    ConfusionMatrix,
    LabeledPredictions,
    MetricKind,
    MetricSpec,
    MetricValue,
    Mode,
    Task,
    all_specs,
    concatenate,
    confusion_from_labels,
    evaluate_centralized,
    metric_from_confusion,
)
from .partitioning import (
    PartitionPlan,
    SkewConfig,
    SkewKind,
    dirichlet_partition,
    manual_skew_partition,
    partition,
)
from .predictors import (
    ConfusionKernel,
    NoisyRegressor,
    emit_predictions,
    ingest_predictions,
    predict_classification,
    predict_regression,
)

__version__ = "0.1.0"
