"""Primary-content extraction with a trained model, plus two rule baselines."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .dom import DomNode, NodeKind, build_node_sequence, chunk_sequence, parse_html, walk_retained
from .metrics import EvalReport, evaluate_by_containment, evaluate_node_level, macro_average, micro_average
from .model import PRIMARY, NeuScraperModel
from .synthetic import LabeledDocument
from .tokenizer import tokenize


@dataclass
class Extraction:
    doc_id: str
    kept_node_ids: list[int] = field(default_factory=list)
    text: str = ""

    def to_json(self) -> str:
        return json.dumps({"doc_id": self.doc_id, "text": self.text, "kept_node_ids": self.kept_node_ids},
                          ensure_ascii=False)


def _extraction(doc_id: str, nodes: Sequence[DomNode], keep: Iterable[bool]) -> Extraction:
    kept = [n for n, k in zip(nodes, keep) if k]
    return Extraction(doc_id, [n.node_id for n in kept], "\n".join(n.text for n in kept))


class Scraper:
    """Runs a (float or quantized) model over pages."""

    def __init__(self, model: NeuScraperModel):
        self.model = model.eval()

    def node_probabilities(self, nodes: Sequence[DomNode]) -> np.ndarray:
        """(n, 6) label probabilities for a page's retained nodes."""
        if not nodes:
            return np.zeros((0, self.model.cfg.n_labels))
        tok_cfg = self.model.tok_cfg
        chunks = [[tokenize(n.text, tok_cfg) for n in c.nodes] for c in chunk_sequence(nodes, self.model.cfg.max_nodes)]
        return self.model.predict_proba(chunks)

    def predict(self, html: str | bytes) -> tuple[list[DomNode], np.ndarray]:
        nodes = build_node_sequence(parse_html(html))
        return nodes, self.node_probabilities(nodes)

    def extract(self, html: str | bytes, threshold: float = 0.5, doc_id: str = "") -> Extraction:
        if not 0.0 < threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
        nodes, probs = self.predict(html)
        return _extraction(doc_id, nodes, probs[:, PRIMARY] >= threshold)


def extract_primary(html: str | bytes, model: NeuScraperModel | Scraper, threshold: float = 0.5,
                    doc_id: str = "") -> Extraction:
    """Keep the nodes whose primary-content probability reaches ``threshold``."""
    scraper = model if isinstance(model, Scraper) else Scraper(model)
    return scraper.extract(html, threshold, doc_id)


def baseline_keep_all(html: str | bytes, doc_id: str = "") -> Extraction:
    """Every retained node, i.e. all visible text."""
    nodes = build_node_sequence(parse_html(html))
    return _extraction(doc_id, nodes, [True] * len(nodes))


def baseline_density(html: str | bytes, min_words: int = 10, max_link_density: float = 0.5,
                     doc_id: str = "") -> Extraction:
    """Word-count and link-density filter.

    Text nodes need ``min_words`` words and at most ``max_link_density`` of
    them inside links; tables and lists only need the word count.
    """
    nodes, keep = [], []
    for node, in_link in walk_retained(parse_html(html)):
        n_words = len(node.text.split())
        if node.kind is NodeKind.TEXT:
            link_density = 1.0 if in_link else 0.0
            keep.append(n_words >= min_words and link_density <= max_link_density)
        else:
            keep.append(n_words >= min_words)
        nodes.append(node)
    return _extraction(doc_id, nodes, keep)


Extractor = Callable[[str, str], Extraction]  # (html, doc_id) -> Extraction


@dataclass
class CorpusEval:
    micro: EvalReport
    per_doc: dict[str, EvalReport]
    errors: dict[str, str]

    @property
    def macro(self) -> dict:
        return macro_average(list(self.per_doc.values()))


def evaluate_extractor(docs: Sequence[LabeledDocument], extractor: Extractor, mode: str = "node") -> CorpusEval:
    """Run ``extractor`` on labeled pages and pool node decisions over the corpus.

    ``mode="node"`` compares kept node ids with the gold labels;
    ``mode="containment"`` only looks at the extracted text.
    """
    if mode not in ("node", "containment"):
        raise ValueError(f"mode must be 'node' or 'containment', got {mode!r}")
    per_doc, errors = {}, {}
    elapsed = 0.0
    for doc in docs:
        nodes = build_node_sequence(parse_html(doc.html))
        bad = [k for k in doc.node_labels if not 0 <= k < len(nodes)]
        if bad:
            errors[doc.doc_id] = f"labels reference missing node ids {bad[:5]}"
            continue
        gold_labels = doc.labels_for(len(nodes))
        t0 = time.perf_counter()
        ex = extractor(doc.html, doc.doc_id)
        elapsed += time.perf_counter() - t0
        if mode == "node":
            kept = set(ex.kept_node_ids)
            per_doc[doc.doc_id] = evaluate_node_level(
                {n.node_id: n.node_id in kept for n in nodes},
                {n.node_id: gold_labels[n.node_id][PRIMARY] for n in nodes},
            )
        else:
            gold = [(n.node_id, n.text, gold_labels[n.node_id][PRIMARY]) for n in nodes]
            per_doc[doc.doc_id] = evaluate_by_containment(ex.text, gold)
    micro = micro_average(list(per_doc.values()))
    if per_doc:
        micro.latency_ms_per_page = 1000.0 * elapsed / len(per_doc)
    return CorpusEval(micro, per_doc, errors)


def model_extractor(model: NeuScraperModel | Scraper, threshold: float = 0.5) -> Extractor:
    scraper = model if isinstance(model, Scraper) else Scraper(model)
    return lambda html, doc_id: scraper.extract(html, threshold, doc_id)


BASELINES: dict[str, Extractor] = {
    "keep_all": lambda html, doc_id: baseline_keep_all(html, doc_id),
    "density": lambda html, doc_id: baseline_density(html, doc_id=doc_id),
}
