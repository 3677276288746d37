"""Hypothesis strategies for round messages."""

from hypothesis import strategies as st

from flameval import ClassificationAM, ConfusionMatrix, MetricSpec, MetricValue, Mode, RegressionAM, Task, all_specs
from flameval.federation import Phase, RoundMessage
from flameval.federation.messages import (
    AMRequest,
    AMResponse,
    ErrorText,
    Registration,
    ResultBroadcast,
    StatRequest,
    StatResponse,
)
from flameval.measures import MeanStatistic

finite = st.floats(allow_nan=False, allow_infinity=False)
specs_st = st.sampled_from(all_specs() + all_specs("regression") + [MetricSpec.parse("f1-macro", 1.0)])


@st.composite
def confusion(draw):
    c = draw(st.integers(1, 5))
    rows = draw(st.lists(st.lists(st.integers(0, 2**53), min_size=c, max_size=c), min_size=c, max_size=c))
    return ConfusionMatrix(rows)


ams = st.one_of(
    confusion().map(ClassificationAM),
    st.builds(RegressionAM, st.floats(0, 1e300), st.floats(0, 1e300), st.integers(0, 2**40), finite),
)

payloads = {
    Phase.REGISTER: st.builds(Registration, st.sampled_from(list(Task)), st.one_of(st.none(), st.integers(1, 100))),
    Phase.STAT_REQUEST: st.builds(StatRequest, st.lists(st.text(max_size=8), max_size=3).map(tuple)),
    Phase.STAT_RESPONSE: st.builds(
        StatResponse,
        st.dictionaries(st.text(max_size=8), st.builds(MeanStatistic, finite, st.integers(0, 2**40)), max_size=3),
    ),
    Phase.AM_REQUEST: st.builds(
        AMRequest,
        st.lists(specs_st, max_size=4).map(tuple),
        st.dictionaries(st.text(max_size=8), finite, max_size=2),
    ),
    Phase.AM_RESPONSE: st.builds(AMResponse, ams),
    Phase.RESULT_BROADCAST: st.builds(
        ResultBroadcast,
        st.lists(st.builds(MetricValue, specs_st, st.sampled_from(list(Mode)), finite, st.integers(0, 2**40)),
                 max_size=4).map(tuple),
    ),
    Phase.ERROR: st.builds(ErrorText, st.text()),
}


@st.composite
def messages(draw):
    phase = draw(st.sampled_from(list(Phase)))
    return RoundMessage(
        phase,
        draw(payloads[phase]),
        draw(st.integers(0, 2**31)),
        draw(st.integers(-1, 1000)),
    )
