"""
Training a small extractor
==========================

A scaled-down model trained for a few epochs on 300 synthetic pages already
beats the two rule baselines. The full-size recipe lives in the acceptance
tests; this run takes about a minute on one core.
"""
import logging

import torch

from neuscrape import (
    ModelConfig,
    SyntheticSpec,
    TrainConfig,
    evaluate_extractor,
    extract_primary,
    generate_synthetic_corpus,
    save_checkpoint,
    train,
)
from neuscrape.extract import BASELINES, model_extractor

logging.basicConfig(level=logging.INFO, format="%(message)s")
torch.set_num_threads(1)

docs = generate_synthetic_corpus(SyntheticSpec(n_pages=360, seed=1))
test, train_docs = docs[:60], docs[60:]

mcfg = ModelConfig(d_node=64, d_model=64, n_layers=2, n_heads=4)
ckpt = train(train_docs, mcfg, TrainConfig(epochs=8, batch_size=16, seed=0))
save_checkpoint(ckpt, "demo.nscp")
model = ckpt.build_model()
print("best epoch", ckpt.metrics["best_epoch"], "val F1", round(ckpt.metrics["val_f1_primary"], 4))

###############################################################################
# Node-level scores on held-out pages.
for name, fn in [("model", model_extractor(model)), *BASELINES.items()]:
    r = evaluate_extractor(test, fn).micro
    print(f"{name:9s} P={r.precision:.3f} R={r.recall:.3f} F1={r.f1:.3f}  {r.latency_ms_per_page:.1f} ms/page")

###############################################################################
# What the extracted text looks like.
print(extract_primary(test[0].html, model, doc_id=test[0].doc_id).text[:600])
