import json

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from neuscrape import (
    Scraper,
    SyntheticSpec,
    baseline_density,
    baseline_keep_all,
    evaluate_extractor,
    extract_primary,
    generate_synthetic_corpus,
    html_to_nodes,
)
from neuscrape.extract import BASELINES, model_extractor
from neuscrape.model import PRIMARY
from neuscrape.synthetic import LabeledDocument

PAGE = (
    "<body><nav><ul><li><a href='/'>Home</a></li><li><a href='/n'>News</a></li></ul></nav>"
    "<h1>Big title</h1><p>one two three four five six seven eight nine ten eleven</p>"
    "<p><a href='/x'>one two three four five six seven eight nine ten eleven</a></p>"
    "<p>short text</p><table><tr><td>a b c d e</td><td>f g h i j</td></tr></table></body>"
)


def test_empty_page_gives_empty_extraction(small_model):
    ex = extract_primary("<body><div></div></body>", small_model, doc_id="e")
    assert ex.text == "" and ex.kept_node_ids == [] and ex.doc_id == "e"


def test_saturated_head_keeps_everything(small_model):
    with torch.no_grad():
        small_model.head.fc2.weight.zero_()
        small_model.head.fc2.bias.fill_(100.0)
    ex = extract_primary(PAGE, small_model)
    nodes = html_to_nodes(PAGE)
    assert ex.kept_node_ids == [n.node_id for n in nodes]
    assert ex.text == "\n".join(n.text for n in nodes)


def test_threshold_bounds(small_model):
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            extract_primary(PAGE, small_model, threshold=bad)


@settings(max_examples=30)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_threshold_monotonic(t1, t2):
    from conftest import SMALL, SMALL_TOK
    from neuscrape import NeuScraperModel

    torch.manual_seed(0)
    scraper = Scraper(NeuScraperModel(SMALL, SMALL_TOK))
    lo, hi = sorted((t1, t2))
    assert set(scraper.extract(PAGE, hi).kept_node_ids) <= set(scraper.extract(PAGE, lo).kept_node_ids)


def test_extraction_json_schema(small_model):
    ex = extract_primary(PAGE, small_model, doc_id="d")
    d = json.loads(ex.to_json())
    assert set(d) == {"doc_id", "text", "kept_node_ids"}
    assert d["kept_node_ids"] == sorted(d["kept_node_ids"])


def test_keep_all():
    assert baseline_keep_all(PAGE).kept_node_ids == list(range(len(html_to_nodes(PAGE))))


def test_density_rules():
    nodes = html_to_nodes(PAGE)
    kept = [nodes[i].text for i in baseline_density(PAGE).kept_node_ids]
    assert kept == ["one two three four five six seven eight nine ten eleven", "a b c d e f g h i j"]


def test_density_drops_short_link_menu():
    menu = "<ul>" + "".join(f"<li><a href='#'>Menu item {i}</a></li>" for i in range(3)) + "</ul>"
    assert baseline_density(f"<body><nav>{menu}</nav></body>").kept_node_ids == []
    assert baseline_density(f"<body><nav>{menu}</nav></body>", min_words=3).kept_node_ids == [0]


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic_corpus(SyntheticSpec(n_pages=40, seed=5))


def test_keep_all_recall_and_precision(corpus):
    res = evaluate_extractor(corpus, BASELINES["keep_all"])
    n_nodes = n_primary = 0
    for doc in corpus:
        n = len(html_to_nodes(doc.html))
        n_nodes += n
        n_primary += sum(lab[PRIMARY] for lab in doc.labels_for(n))
    assert res.micro.recall == 1.0
    assert res.micro.precision == pytest.approx(n_primary / n_nodes, abs=1e-12)
    assert res.micro.latency_ms_per_page > 0
    assert evaluate_extractor(corpus, BASELINES["keep_all"], "containment").micro.recall == 1.0


def test_gold_extractor_scores_perfectly(corpus):
    by_id = {d.doc_id: d for d in corpus}

    def gold(html, doc_id):
        nodes = html_to_nodes(html)
        labels = by_id[doc_id].labels_for(len(nodes))
        from neuscrape.extract import _extraction

        return _extraction(doc_id, nodes, [lab[PRIMARY] for lab in labels])

    r = evaluate_extractor(corpus, gold).micro
    assert (r.accuracy, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0)
    assert len(evaluate_extractor(corpus, gold).per_doc) == len(corpus)


def test_label_mismatch_reported_per_document(small_model):
    docs = [
        LabeledDocument("ok", "<p>a</p>", {0: (True,) * 6}),
        LabeledDocument("bad", "<p>a</p>", {5: (True,) * 6}),
    ]
    res = evaluate_extractor(docs, model_extractor(small_model))
    assert set(res.per_doc) == {"ok"} and set(res.errors) == {"bad"}
    with pytest.raises(ValueError):
        evaluate_extractor(docs, model_extractor(small_model), mode="fuzzy")
