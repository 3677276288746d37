"""
One evaluation round over TCP
=============================

A coordinator and four participants on localhost. Participants send only
aggregatable measures; the coordinator folds them and broadcasts the metrics.
"""

import logging

from flameval import MetricSpec, SkewKind, flam_evaluate
from flameval.federation import run_in_process, run_over_sockets
from flameval.report import SyntheticConfig, synthetic_federation

logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")

parts = synthetic_federation(SyntheticConfig(kind=SkewKind.LS, alpha_label=0.6), seed=3)
specs = [MetricSpec.parse(n) for n in ("accuracy", "f1-macro", "mcc")]

wire = run_over_sockets(parts, specs)
local = run_in_process(parts, specs)

for w, q in zip(wire, local):
    lib = flam_evaluate(parts, w.spec).value
    print(f"{w.spec.name:<10} socket {w.value:.6f}  queue {q.value:.6f}  library {lib:.6f}")

# Same numbers, bit for bit, no matter which transport carried them.
assert [v.value for v in wire] == [v.value for v in local]

# R^2 adds a statistics phase for the global mean before the AM phase.
reg = synthetic_federation(SyntheticConfig(task="regression", kind=SkewKind.IID), seed=1)
(r2,) = run_over_sockets(reg, [MetricSpec.parse("r2")])
print("r2 over sockets:", r2.value)
