import json

import pytest

from neuscrape import LabeledDocument, SyntheticSpec, generate_synthetic_corpus, html_to_nodes, read_corpus, write_corpus
from neuscrape.model import LABELS, PRIMARY


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic_corpus(SyntheticSpec(n_pages=100, seed=11))


def test_same_spec_same_bytes(tmp_path):
    spec = SyntheticSpec(n_pages=1, seed=7)
    write_corpus(generate_synthetic_corpus(spec), tmp_path / "a.jsonl")
    write_corpus(generate_synthetic_corpus(spec), tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_different_seeds_differ():
    a = generate_synthetic_corpus(SyntheticSpec(n_pages=2, seed=1))
    b = generate_synthetic_corpus(SyntheticSpec(n_pages=2, seed=2))
    assert [d.html for d in a] != [d.html for d in b]


def test_labels_reference_retained_nodes(corpus):
    for doc in corpus:
        nodes = html_to_nodes(doc.html)
        assert set(doc.node_labels) <= {n.node_id for n in nodes}
        for node_id, labels in doc.node_labels.items():
            assert len(labels) == len(LABELS)
            kind = nodes[node_id].kind.value
            if labels[LABELS.index("table")]:
                assert kind == "Table"
            if labels[LABELS.index("list")]:
                assert kind == "List"


def test_primary_fraction_in_range(corpus):
    lo, hi = SyntheticSpec().primary_fraction_range
    for doc in corpus:
        n = len(html_to_nodes(doc.html))
        frac = sum(lab[PRIMARY] for lab in doc.labels_for(n)) / n
        assert lo <= frac <= hi


def test_page_structure(corpus):
    title, heading, para = (LABELS.index(k) for k in ("title", "heading", "paragraph"))
    for doc in corpus:
        labels = list(doc.node_labels.values())
        assert sum(lab[title] for lab in labels) == 1
        assert any(lab[para] for lab in labels)
        assert all(lab[PRIMARY] for lab in labels)
    assert any(any(lab[heading] for lab in d.node_labels.values()) for d in corpus)
    # boilerplate is not only in nav/li markup: some of it lives in <p> and heading tags
    boiler_tags = {
        n.tag for d in corpus for n in html_to_nodes(d.html) if not d.labels_for(n.node_id + 1)[n.node_id][PRIMARY]
    }
    assert "p" in boiler_tags and boiler_tags & {"h2", "h3", "h4"}


def test_sentinels_excluded(corpus):
    for doc in corpus[:20]:
        assert "SCRIPT_SENTINEL" in doc.html and "COMMENT_SENTINEL" in doc.html
        assert not any("SENTINEL" in n.text for n in html_to_nodes(doc.html))


def test_jsonl_round_trip(corpus, tmp_path):
    path = tmp_path / "c.jsonl"
    write_corpus(corpus[:5], path)
    first = json.loads(path.read_text().splitlines()[0])
    assert set(first) == {"doc_id", "html", "labels"}
    assert all(len(v) == 6 and all(isinstance(b, bool) for b in v) for v in first["labels"].values())
    back = read_corpus(path)
    assert [(d.doc_id, d.html, d.node_labels) for d in back] == [(d.doc_id, d.html, d.node_labels) for d in corpus[:5]]


def test_bad_label_width_rejected():
    with pytest.raises(ValueError):
        LabeledDocument.from_json('{"doc_id": "x", "html": "<p>a</p>", "labels": {"0": [true]}}')


def test_spec_dict_round_trip():
    spec = SyntheticSpec(n_pages=3, seed=5, primary_paragraph_range=(2, 4))
    assert SyntheticSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
