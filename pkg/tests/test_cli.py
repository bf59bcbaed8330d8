import json
import os
import subprocess
import sys

import pytest
import torch

from neuscrape import NeuScraperModel, SyntheticSpec, generate_synthetic_corpus, save_checkpoint, write_corpus
from neuscrape.cli import CorpusRecord, main, resolve_workers, run_bench

from conftest import SMALL, SMALL_TOK


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    torch.manual_seed(0)
    save_checkpoint(NeuScraperModel(SMALL, SMALL_TOK), d / "m.nscp")
    write_corpus(generate_synthetic_corpus(SyntheticSpec(n_pages=6, seed=1)), d / "c.jsonl")
    return d


def run_cli(*args, env_extra=None):
    env = {k: v for k, v in os.environ.items() if k != "NEUSCRAPE_THREADS"}
    env.update(env_extra or {})
    return subprocess.run([sys.executable, "-m", "neuscrape", *args], capture_output=True, text=True, env=env)


def test_scrape_preserves_order_with_workers(files, tmp_path):
    res = run_cli("scrape", str(files / "c.jsonl"), "--model", str(files / "m.nscp"), "--workers", "4",
                  "--out", str(tmp_path / "o.jsonl"))
    assert res.returncode == 0, res.stderr
    ids = [json.loads(line)["doc_id"] for line in (tmp_path / "o.jsonl").read_text().splitlines()]
    assert ids == [f"syn-1-{i:06d}" for i in range(6)]
    assert json.loads(res.stderr.strip().splitlines()[-1]) == {"scraped": 6, "skipped": 0, "workers": 4}


def test_scrape_skips_bad_records(files, tmp_path, capsys):
    corpus = tmp_path / "mixed.jsonl"
    corpus.write_text(
        '{"doc_id": "a", "html": "<p>first page</p>"}\n'
        '{"doc_id": "b", "html": "<!-- nothing -->"}\n'
        '{"doc_id": "c", "html": "<p>third page</p>"}\n'
    )
    assert main(["scrape", str(corpus), "--model", str(files / "m.nscp")]) == 0
    out, err = capsys.readouterr()
    assert [json.loads(line)["doc_id"] for line in out.splitlines()] == ["a", "c"]
    assert json.loads(err.strip().splitlines()[-1])["skipped"] == 1


def test_scrape_html_files_and_directories(files, tmp_path, capsys):
    (tmp_path / "b.html").write_text("<p>bee</p>")
    (tmp_path / "a.html").write_text("<p>ay</p>")
    assert main(["scrape", str(tmp_path), "--model", str(files / "m.nscp"), "--threshold", "0.01"]) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [r["doc_id"].rsplit("/", 1)[-1] for r in rows] == ["a.html", "b.html"]


def test_fatal_errors_are_one_json_line(files, tmp_path):
    res = run_cli("scrape", str(tmp_path / "missing.jsonl"), "--model", str(files / "m.nscp"))
    assert res.returncode != 0
    line = res.stderr.strip()
    assert "\n" not in line and json.loads(line)["command"] == "scrape"
    (tmp_path / "junk.nscp").write_bytes(b"not a checkpoint")
    res = run_cli("eval", "--corpus", str(files / "c.jsonl"), "--model", str(tmp_path / "junk.nscp"))
    assert res.returncode != 0 and json.loads(res.stderr.strip())["error"] == "CorruptCheckpoint"
    res = run_cli("train", "--corpus", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "x.nscp"))
    assert res.returncode != 0 and "corpus not found" in json.loads(res.stderr.strip())["message"]


def test_duplicate_doc_id_is_fatal(files, tmp_path):
    corpus = tmp_path / "dup.jsonl"
    corpus.write_text('{"doc_id": "a", "html": "<p>x</p>"}\n{"doc_id": "a", "html": "<p>y</p>"}\n')
    res = run_cli("scrape", str(corpus), "--model", str(files / "m.nscp"))
    assert res.returncode != 0 and "duplicate" in res.stderr


def test_env_overrides_workers(monkeypatch):
    monkeypatch.setenv("NEUSCRAPE_THREADS", "3")
    assert resolve_workers(1) == 3
    monkeypatch.delenv("NEUSCRAPE_THREADS")
    assert resolve_workers(2) == 2


def test_gen_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["gen", "--n-pages", "3", "--seed", "4", "--out", str(tmp_path / f"{name}.jsonl")]) == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_pages": 2, "seed": 9}))
    assert main(["gen", "--spec", str(spec), "--out", str(tmp_path / "c.jsonl")]) == 0
    assert len((tmp_path / "c.jsonl").read_text().splitlines()) == 2


def test_train_writes_checkpoint_and_log(files, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": {"d_node": 16, "d_model": 16, "n_layers": 1, "n_heads": 2, "node_heads": 2},
                               "tokenizer": {"vocab_size": 101, "t_max": 8}, "train": {"batch_size": 4}}))
    logs = []
    for run in range(2):
        out = tmp_path / f"m{run}.nscp"
        assert main(["train", "--corpus", str(files / "c.jsonl"), "--config", str(cfg), "--epochs", "2",
                     "--seed", "3", "--out", str(out)]) == 0
        logs.append((tmp_path / f"m{run}.nscp.log.jsonl").read_text())
    rows = [json.loads(line) for line in logs[0].splitlines()]
    assert [set(r) for r in rows] == [{"epoch", "train_loss", "val_f1_primary", "lr_last"}] * 2
    assert logs[0] == logs[1]
    capsys.readouterr()


def test_eval_modes(files, capsys):
    corpus = str(files / "c.jsonl")
    assert main(["eval", "--corpus", corpus, "--extractor", "keep_all"]) == 0
    node = json.loads(capsys.readouterr().out)
    assert node["recall"] == 1.0 and {"tp", "fp", "tn", "fn", "f1", "latency_ms_per_page"} <= set(node)
    assert main(["eval", "--corpus", corpus, "--extractor", "density", "--mode", "containment", "--macro"]) == 0
    assert set(json.loads(capsys.readouterr().out)["macro"]) == {"accuracy", "precision", "recall", "f1"}
    assert main(["eval", "--corpus", corpus, "--model", str(files / "m.nscp")]) == 0
    assert main(["eval", "--corpus", corpus]) == 1
    capsys.readouterr()


def test_quantize_then_scrape(files, tmp_path, capsys):
    q = tmp_path / "q.nscp"
    assert main(["quantize", "--model", str(files / "m.nscp"), "--mode", "unsigned8", "--out", str(q)]) == 0
    assert json.loads(capsys.readouterr().out)["mode"] == "unsigned8"
    assert main(["scrape", str(files / "c.jsonl"), "--model", str(q), "--backend", "reference"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 6


def test_bench(files, capsys):
    recs = [CorpusRecord("a", "<p>one</p><p>two</p>"), CorpusRecord("b", "<p>three</p>")]
    rep = run_bench(str(files / "m.nscp"), recs, "signed8", warmup=1)
    assert rep.pages_evaluated == 2 and rep.median_ms <= rep.p95_ms and rep.throughput_pages_per_s > 0
    assert 0.0 <= rep.decision_agreement <= 1.0
    assert main(["bench", "--corpus", str(files / "c.jsonl"), "--model", str(files / "m.nscp"), "--workers", "2"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pages_evaluated"] == 6 and report["quantization"] == "none" and report["workers"] == 2


def test_bench_needs_pages(files, tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["bench", "--corpus", str(empty), "--model", str(files / "m.nscp")]) == 1
    assert json.loads(capsys.readouterr().err.strip())["command"] == "bench"


def test_nodes_dump(files, capsys):
    assert main(["nodes", str(files / "c.jsonl")]) == 0
    first = json.loads(capsys.readouterr().out.splitlines()[0])
    assert set(first) == {"doc_id", "node_id", "kind", "tag", "depth", "text"}
