import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from flameval import LabeledPredictions, MetricSpec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def running_example():
    """Two participants: P1 misclassifies one of four class-0 samples, P2 is perfect."""
    return [
        LabeledPredictions.classification([0, 0, 0, 0], [0, 0, 0, 1], 2),
        LabeledPredictions.classification([1, 1], [1, 1], 2),
    ]


@pytest.fixture
def regression_example():
    return [
        LabeledPredictions.regression([1, 2], [1, 2]),
        LabeledPredictions.regression([3, 4], [4, 3]),
    ]


def spec(name: str) -> MetricSpec:
    return MetricSpec.parse(name)


@st.composite
def classification_data(draw, max_classes=6, max_size=60, min_size=0):
    c = draw(st.integers(2, max_classes))
    n = draw(st.integers(min_size, max_size))
    yt = draw(st.lists(st.integers(0, c - 1), min_size=n, max_size=n))
    yp = draw(st.lists(st.integers(0, c - 1), min_size=n, max_size=n))
    return LabeledPredictions.classification(np.array(yt, dtype=np.int64), np.array(yp, dtype=np.int64), c)


@st.composite
def regression_data(draw, max_size=60, min_size=0):
    n = draw(st.integers(min_size, max_size))
    reals = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
    yt = draw(st.lists(reals, min_size=n, max_size=n))
    yp = draw(st.lists(reals, min_size=n, max_size=n))
    return LabeledPredictions.regression(yt, yp)


@st.composite
def split(draw, data, max_parts=6):
    """Random disjoint partitions (possibly empty) covering ``data``."""
    p = draw(st.integers(1, max_parts))
    owner = draw(st.lists(st.integers(0, p - 1), min_size=len(data), max_size=len(data)))
    owner = np.array(owner, dtype=np.int64)
    return [data.subset(np.flatnonzero(owner == i)) for i in range(p)]
