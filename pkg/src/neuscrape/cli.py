"""Command-line interface: ``neuscrape {scrape,train,eval,bench,gen,quantize,nodes}``."""
from __future__ import annotations

import argparse
import json
import logging
import multiprocessing as mp
import os
import statistics
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

log = logging.getLogger("neuscrape")


class CliError(Exception):
    """Fatal error; reported as one JSON line on stderr."""


@dataclass
class CorpusRecord:
    doc_id: str
    html: str | bytes | None
    url: str | None = None
    error: str | None = None


def iter_records(paths: list[str]) -> Iterator[CorpusRecord]:
    """Records from ``.jsonl`` corpora, HTML files, or directories of ``*.htm(l)`` files."""
    for raw in paths:
        path = Path(raw)
        if not path.exists():
            raise CliError(f"input not found: {raw}")
        if path.is_dir():
            files = sorted(p for p in path.iterdir() if p.suffix.lower() in (".html", ".htm"))
            for f in files:
                yield CorpusRecord(str(f), f.read_bytes())
        elif path.suffix == ".jsonl":
            seen = set()
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    if not line.strip():
                        continue
                    try:
                        d = json.loads(line)
                        doc_id = str(d["doc_id"])
                    except (ValueError, KeyError, TypeError) as exc:
                        yield CorpusRecord(f"{raw}:{lineno}", None, error=f"bad record: {exc!r}")
                        continue
                    if doc_id in seen:
                        raise CliError(f"duplicate doc_id {doc_id!r} in {raw}")
                    seen.add(doc_id)
                    html = d.get("html")
                    yield CorpusRecord(doc_id, html, d.get("url"),
                                       None if isinstance(html, str) else "record has no html string")
        else:
            yield CorpusRecord(str(path), path.read_bytes())


def resolve_workers(requested: int) -> int:
    env = os.environ.get("NEUSCRAPE_THREADS")
    if env:
        try:
            requested = int(env)
        except ValueError as exc:
            raise CliError(f"NEUSCRAPE_THREADS must be an integer, got {env!r}") from exc
    return max(1, requested)


# worker state, set once per process
_W: dict = {}


def _init_worker(model_path: str, quant_mode: str, backend: str, threshold: float):
    import torch

    from .checkpoint import load_checkpoint
    from .extract import Scraper
    from .quantize import load_model, quantize

    torch.set_num_threads(1)
    ckpt = load_checkpoint(model_path)
    model = load_model(ckpt, backend) if quant_mode == "none" else quantize(ckpt, quant_mode, backend)
    _W["scraper"] = Scraper(model)
    _W["threshold"] = threshold


def _scrape_one(rec: CorpusRecord) -> tuple[str, str | None, str | None]:
    if rec.error:
        return rec.doc_id, None, rec.error
    try:
        ex = _W["scraper"].extract(rec.html, _W["threshold"], rec.doc_id)
    except Exception as exc:  # one bad page must not stop the run
        return rec.doc_id, None, f"{type(exc).__name__}: {exc}"
    return rec.doc_id, ex.to_json(), None


def _time_one(rec: CorpusRecord) -> tuple[str, float | None, str | None]:
    if rec.error:
        return rec.doc_id, None, rec.error
    t0 = time.perf_counter()
    try:
        _W["scraper"].extract(rec.html, _W["threshold"], rec.doc_id)
    except Exception as exc:
        return rec.doc_id, None, f"{type(exc).__name__}: {exc}"
    return rec.doc_id, (time.perf_counter() - t0) * 1000.0, None


def _map_ordered(fn, records, workers: int, init_args: tuple):
    """Apply ``fn`` to records in order, in-process or on a worker pool."""
    if workers == 1:
        _init_worker(*init_args)
        yield from map(fn, records)
        return
    ctx = mp.get_context("fork" if "fork" in mp.get_all_start_methods() else "spawn")
    with ctx.Pool(workers, initializer=_init_worker, initargs=init_args) as pool:
        yield from pool.imap(fn, records, chunksize=4)


def _check_model(path: str):
    from .checkpoint import load_checkpoint

    if not Path(path).is_file():
        raise CliError(f"model not found: {path}")
    return load_checkpoint(path)


def cmd_scrape(args) -> int:
    _check_model(args.model)
    workers = resolve_workers(args.workers)
    records = list(iter_records(args.inputs))
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    n_ok = n_skip = 0
    try:
        init = (args.model, args.quantize, args.backend, args.threshold)
        for doc_id, line, err in _map_ordered(_scrape_one, records, workers, init):
            if err:
                n_skip += 1
                log.warning("skipped %s: %s", doc_id, err)
            else:
                n_ok += 1
                out.write(line + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    print(json.dumps({"scraped": n_ok, "skipped": n_skip, "workers": workers}), file=sys.stderr)
    return 0


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc


def cmd_train(args) -> int:
    from .checkpoint import save_checkpoint
    from .model import ModelConfig
    from .synthetic import read_corpus
    from .tokenizer import TokenizerConfig
    from .trainer import TrainConfig, train

    if not Path(args.corpus).is_file():
        raise CliError(f"corpus not found: {args.corpus}")
    cfg = _load_config(args.config)
    mcfg = ModelConfig(**cfg.get("model", {}))
    tok_cfg = TokenizerConfig(**cfg.get("tokenizer", {}))
    tdict = dict(cfg.get("train", {}))
    if args.seed is not None:
        tdict["seed"] = args.seed
    if args.val_frac is not None:
        tdict["val_frac"] = args.val_frac
    if args.epochs is not None:
        tdict["epochs"] = args.epochs
    tcfg = TrainConfig.from_dict(tdict)
    corpus = read_corpus(args.corpus)
    log_path = args.log or str(args.out) + ".log.jsonl"
    with open(log_path, "w", encoding="utf-8") as logf:
        def on_epoch(entry):
            keys = ("epoch", "train_loss", "val_f1_primary", "lr_last")
            logf.write(json.dumps({k: entry[k] for k in keys}) + "\n")
            logf.flush()

        ckpt = train(corpus, mcfg, tcfg, tok_cfg, on_epoch=on_epoch)
    save_checkpoint(ckpt, args.out)
    print(json.dumps({"checkpoint": str(args.out), "log": log_path, "best_epoch": ckpt.metrics["best_epoch"],
                      "val_f1_primary": ckpt.metrics["val_f1_primary"]}))
    return 0


def _make_extractor(args):
    from .extract import BASELINES, Scraper, model_extractor
    from .quantize import load_model, quantize

    if args.model:
        ckpt = _check_model(args.model)
        qmode = getattr(args, "quantize", "none")
        model = load_model(ckpt, args.backend) if qmode == "none" else quantize(ckpt, qmode, args.backend)
        return model_extractor(Scraper(model), args.threshold)
    return BASELINES[args.extractor]


def cmd_eval(args) -> int:
    from .extract import evaluate_extractor
    from .synthetic import read_corpus

    if bool(args.model) == bool(args.extractor):
        raise CliError("give exactly one of --model or --extractor")
    if not Path(args.corpus).is_file():
        raise CliError(f"corpus not found: {args.corpus}")
    result = evaluate_extractor(read_corpus(args.corpus), _make_extractor(args), args.mode)
    for doc_id, err in result.errors.items():
        print(json.dumps({"doc_id": doc_id, "error": err}), file=sys.stderr)
    report = result.micro.to_dict()
    if args.macro:
        report["macro"] = result.macro
    text = json.dumps(report, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


@dataclass
class BenchReport:
    pages_evaluated: int
    mean_ms: float
    median_ms: float
    p95_ms: float
    throughput_pages_per_s: float
    workers: int
    quantization: str
    backend: str
    skipped: int = 0
    decision_agreement: float | None = None


def _percentile(values, q: float) -> float:
    return float(np.percentile(np.asarray(values, dtype=np.float64), q))


def run_bench(model_path: str, records: list[CorpusRecord], quant_mode: str = "none", backend: str = "int8",
              workers: int = 1, threshold: float = 0.5, warmup: int = 5) -> BenchReport:
    """Time end-to-end extraction (parse to kept nodes) per page."""
    if not records:
        raise CliError("bench needs at least one page")
    init = (model_path, quant_mode, backend, threshold)
    if workers == 1:
        _init_worker(*init)
        for rec in records[:warmup]:
            _time_one(rec)
    t0 = time.perf_counter()
    results = list(_map_ordered(_time_one, records, workers, init))
    wall = time.perf_counter() - t0
    times = [ms for _, ms, err in results if err is None]
    if not times:
        raise CliError("no page could be processed")
    report = BenchReport(
        pages_evaluated=len(times),
        mean_ms=statistics.fmean(times),
        median_ms=_percentile(times, 50),
        p95_ms=_percentile(times, 95),
        throughput_pages_per_s=len(times) / wall,
        workers=workers,
        quantization=quant_mode,
        backend=backend,
        skipped=len(results) - len(times),
    )
    if quant_mode != "none":
        report.decision_agreement = decision_agreement(model_path, records, quant_mode, backend, threshold)
    return report


def decision_agreement(model_path: str, records, quant_mode: str, backend: str, threshold: float = 0.5) -> float:
    """Share of nodes whose primary decision is the same under the float and quantized model."""
    from .checkpoint import load_checkpoint
    from .extract import Scraper
    from .model import PRIMARY
    from .quantize import quantize

    ckpt = load_checkpoint(model_path)
    ref, quant = Scraper(ckpt.build_model()), Scraper(quantize(ckpt, quant_mode, backend))
    same = total = 0
    for rec in records:
        if rec.error:
            continue
        try:
            nodes, p_ref = ref.predict(rec.html)
        except Exception:
            continue
        p_q = quant.node_probabilities(nodes)
        same += int(((p_ref[:, PRIMARY] >= threshold) == (p_q[:, PRIMARY] >= threshold)).sum())
        total += len(nodes)
    return same / total if total else 1.0


def cmd_bench(args) -> int:
    _check_model(args.model)
    records = list(iter_records([args.corpus]))
    if args.limit:
        records = records[: args.limit]
    report = run_bench(args.model, records, args.quantize, args.backend, resolve_workers(args.workers),
                       args.threshold, args.warmup)
    print(json.dumps(asdict(report), sort_keys=True))
    return 0


def cmd_gen(args) -> int:
    from .synthetic import SyntheticSpec, iter_synthetic_corpus

    spec = SyntheticSpec.from_dict(_load_config(args.spec)) if args.spec else SyntheticSpec()
    overrides = {k: v for k, v in (("n_pages", args.n_pages), ("seed", args.seed)) if v is not None}
    if overrides:
        spec = SyntheticSpec.from_dict({**spec.to_dict(), **overrides})
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for doc in iter_synthetic_corpus(spec):
            out.write(doc.to_json() + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_quantize(args) -> int:
    from .checkpoint import save_checkpoint
    from .quantize import quantize

    ckpt = _check_model(args.model)
    qmodel = quantize(ckpt, args.mode, backend="reference")
    save_checkpoint(qmodel.to_checkpoint(ckpt.seed, ckpt.metrics), args.out)
    print(json.dumps({"checkpoint": str(args.out), "mode": args.mode}))
    return 0


def cmd_nodes(args) -> int:
    from .dom import html_to_nodes, nodes_to_jsonl

    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for rec in iter_records(args.inputs):
            if rec.error:
                log.warning("skipped %s: %s", rec.doc_id, rec.error)
                continue
            try:
                text = nodes_to_jsonl(rec.doc_id, html_to_nodes(rec.html))
            except Exception as exc:
                log.warning("skipped %s: %s", rec.doc_id, exc)
                continue
            out.write(text)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neuscrape", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def model_opts(sp, required=True):
        sp.add_argument("--model", required=required, help="checkpoint file")
        sp.add_argument("--threshold", type=float, default=0.5)
        sp.add_argument("--quantize", choices=["none", "signed8", "unsigned8"], default="none")
        sp.add_argument("--backend", choices=["int8", "reference"], default="int8",
                        help="execution backend for quantized weights")

    sp = sub.add_parser("scrape", help="extract primary content")
    sp.add_argument("inputs", nargs="+", help="HTML files, directories, or JSONL corpora")
    model_opts(sp)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_scrape)

    sp = sub.add_parser("train", help="train a model on a labeled corpus")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--config", help='JSON with optional "model", "tokenizer", "train" sections')
    sp.add_argument("--val-frac", type=float)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.add_argument("--log")
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("eval", help="score an extractor on a labeled corpus")
    sp.add_argument("--corpus", required=True)
    model_opts(sp, required=False)
    sp.add_argument("--extractor", choices=["keep_all", "density"])
    sp.add_argument("--mode", choices=["node", "containment"], default="node")
    sp.add_argument("--macro", action="store_true", help="also report per-page macro averages")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("bench", help="measure per-page latency")
    sp.add_argument("--corpus", required=True)
    model_opts(sp)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--warmup", type=int, default=5)
    sp.add_argument("--limit", type=int)
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("gen", help="generate a synthetic labeled corpus")
    sp.add_argument("--spec", help="JSON file with SyntheticSpec fields")
    sp.add_argument("--n-pages", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_gen)

    sp = sub.add_parser("quantize", help="write an 8-bit quantized checkpoint")
    sp.add_argument("--model", required=True)
    sp.add_argument("--mode", choices=["signed8", "unsigned8"], default="signed8")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_quantize)

    sp = sub.add_parser("nodes", help="dump retained DOM nodes as JSONL")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_nodes)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except Exception as exc:
        from .errors import NeuScrapeError

        if not isinstance(exc, (CliError, NeuScrapeError, OSError, ValueError)):
            raise
        print(json.dumps({"error": type(exc).__name__, "command": args.command, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
