"""
8-bit weights
=============

Every linear layer is quantized per tensor to signed or unsigned 8-bit
levels; embeddings and layer norms stay in float32. The ``int8`` backend
runs integer matmuls, ``reference`` dequantizes on the fly.

Run ``03_train_and_extract.py`` first; it writes ``demo.nscp``.
"""
import time

import numpy as np
import torch

from neuscrape import SyntheticSpec, generate_synthetic_corpus, load_checkpoint, load_model, quantize, save_checkpoint
from neuscrape.extract import Scraper
from neuscrape.model import PRIMARY
from neuscrape.quantize import quantize_tensor

torch.set_num_threads(1)

w = np.array([-1.0, 0.0, 1.0], dtype=np.float32)
qt = quantize_tensor(w, "signed8")
print("levels", qt.levels, "scale", qt.scale, "zero point", qt.zero_point, "back", qt.dequantize())

ckpt = load_checkpoint("demo.nscp")
pages = [d.html for d in generate_synthetic_corpus(SyntheticSpec(n_pages=80, seed=99))]
flt = Scraper(ckpt.build_model())


def run(scraper):
    scraper.predict(pages[0])  # warm up
    t0 = time.perf_counter()
    probs = [scraper.predict(p)[1][:, PRIMARY] for p in pages]
    return np.concatenate(probs), 1000 * (time.perf_counter() - t0) / len(pages)


p_float, ms_float = run(flt)
for mode in ("signed8", "unsigned8"):
    p_q, ms_q = run(Scraper(quantize(ckpt, mode, backend="int8")))
    agree = np.mean((p_q >= 0.5) == (p_float >= 0.5))
    print(f"{mode}: agreement {agree:.4f}, {ms_float:.1f} -> {ms_q:.1f} ms/page")

###############################################################################
# A quantized checkpoint stores the 8-bit levels plus scale and zero point.
save_checkpoint(quantize(ckpt, "signed8", backend="reference"), "demo-q8.nscp")
q_ckpt = load_checkpoint("demo-q8.nscp")
print(q_ckpt.tensors["head.fc1.weight"].dtype, q_ckpt.quantization["params"]["head.fc1.weight"])
print(type(load_model(q_ckpt)).__name__)
