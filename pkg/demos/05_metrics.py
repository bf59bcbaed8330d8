"""
Node-level and containment scoring
==================================

Extractors that report node ids are scored directly. Extractors that only
return text are scored by checking which gold node texts occur in it.
On pages where no node text is a substring of another, both agree.
"""
from neuscrape import EvalReport, evaluate_by_containment, evaluate_node_level
from neuscrape.metrics import macro_average, micro_average

r = EvalReport.from_counts(tp=2, fp=1, tn=6, fn=1)
print(r.to_json())

gold_nodes = [(0, "Harbor market opens at eight", True), (1, "Home", False), (2, "Arrive early", True)]
pred = {0: True, 1: False, 2: False}
by_node = evaluate_node_level(pred, {i: g for i, _, g in gold_nodes})
by_text = evaluate_by_containment("Harbor market opens at eight", gold_nodes)
print(by_node == by_text, by_node.f1)

###############################################################################
# Collisions break the equivalence: "Home" appears inside a kept paragraph.
by_text = evaluate_by_containment("Back Home at eight", [(0, "Back Home at eight", True), (1, "Home", False)])
print(by_text.fp)

###############################################################################
# Pooling counts (micro) versus averaging pages (macro).
pages = [EvalReport.from_counts(9, 1, 0, 0), EvalReport.from_counts(0, 0, 5, 5)]
print("micro F1", round(micro_average(pages).f1, 3), "macro F1", macro_average(pages)["f1"])
