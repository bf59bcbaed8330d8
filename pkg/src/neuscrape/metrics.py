"""Node-level scoring of primary-content extraction.

Each retained node is one binary decision (primary or not). Extractors that
report node ids are scored directly; extractors that only return text are
scored by checking which gold node texts appear inside the returned text.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

from .dom import normalize_text
from .errors import KeyMismatch


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


@dataclass
class EvalReport:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    accuracy: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    latency_ms_per_page: float | None = None

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int, latency_ms_per_page: float | None = None) -> "EvalReport":
        precision = _div(tp, tp + fp)
        recall = _div(tp, tp + fn)
        return cls(
            tp, fp, tn, fn,
            accuracy=_div(tp + tn, tp + tn + fp + fn),
            precision=precision,
            recall=recall,
            f1=_div(2 * precision * recall, precision + recall),
            latency_ms_per_page=latency_ms_per_page,
        )

    def __add__(self, other: "EvalReport") -> "EvalReport":
        return EvalReport.from_counts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def evaluate_node_level(pred: Mapping[int, bool], gold: Mapping[int, bool]) -> EvalReport:
    """Confusion counts of per-node primary decisions; both maps must share keys."""
    if pred.keys() != gold.keys():
        missing = sorted(set(gold) ^ set(pred))[:5]
        raise KeyMismatch(f"prediction and gold node ids differ (e.g. {missing})")
    tp = fp = tn = fn = 0
    for k, g in gold.items():
        p = bool(pred[k])
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    return EvalReport.from_counts(tp, fp, tn, fn)


def evaluate_by_containment(extracted_text: str, gold_nodes: Iterable[tuple[int, str, bool]]) -> EvalReport:
    """Score an extractor that only returns text.

    A gold node counts as predicted primary iff its normalized text occurs in
    the normalized extracted text. Nodes with empty text are skipped.
    """
    haystack = normalize_text(extracted_text)
    pred, gold = {}, {}
    for node_id, text, is_primary in gold_nodes:
        needle = normalize_text(text)
        if not needle:
            continue
        pred[node_id] = needle in haystack
        gold[node_id] = bool(is_primary)
    return evaluate_node_level(pred, gold)


def micro_average(reports: Sequence[EvalReport]) -> EvalReport:
    return sum(reports, EvalReport())


def macro_average(reports: Sequence[EvalReport]) -> dict:
    """Unweighted per-page mean of the four rates."""
    n = len(reports)
    keys = ("accuracy", "precision", "recall", "f1")
    return {k: _div(sum(getattr(r, k) for r in reports), n) for k in keys}
