"""Training loop for the node classifier."""
from __future__ import annotations

import copy
import json
import logging
import math
import random
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
import torch

from .checkpoint import Checkpoint
from .dom import build_node_sequence, chunk_sequence, parse_html
from .errors import EmptyCorpus, NonFiniteLoss
from .model import PRIMARY, ModelConfig, NeuScraperModel, bce_with_logits_sum, make_batch
from .synthetic import LabeledDocument
from .tokenizer import TokenizerConfig, tokenize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16  # chunks per step
    peak_lr: float = 6e-4
    warmup_frac: float = 0.05
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    val_frac: float = 0.1
    threshold: float = 0.5

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d)


def warmup_steps(total_steps: int, warmup_frac: float) -> int:
    return math.ceil(warmup_frac * total_steps)


def lr_at(step: int, total_steps: int, peak_lr: float, warmup_frac: float = 0.05) -> float:
    """Learning rate for update ``step`` (1-based): linear warmup, then cosine decay to 0 at ``total_steps``."""
    warm = warmup_steps(total_steps, warmup_frac)
    if step <= warm:
        return peak_lr * step / warm if warm else peak_lr
    progress = min(1.0, (step - warm) / max(1, total_steps - warm))
    return peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class Example:
    doc_id: str
    tokens: list[list[int]]
    labels: np.ndarray  # (n, 6) float32


def prepare_examples(docs: Sequence[LabeledDocument], max_nodes: int, tok_cfg: TokenizerConfig) -> list[Example]:
    """One example per chunk of every document."""
    out = []
    for doc in docs:
        nodes = build_node_sequence(parse_html(doc.html))
        labels = np.asarray(doc.labels_for(len(nodes)), dtype=np.float32).reshape(len(nodes), -1)
        missing = set(doc.node_labels) - set(range(len(nodes)))
        if missing:
            raise ValueError(f"{doc.doc_id}: labels for nodes that do not exist: {sorted(missing)[:5]}")
        for chunk in chunk_sequence(nodes, max_nodes, doc.doc_id):
            ids = [n.node_id for n in chunk.nodes]
            out.append(Example(doc.doc_id, [tokenize(n.text, tok_cfg) for n in chunk.nodes], labels[ids]))
    return out


def split_corpus(docs: Sequence[LabeledDocument], val_frac: float, seed: int):
    """Shuffle by doc id and split into (train, validation), disjoint by doc id."""
    ids = sorted({d.doc_id for d in docs})
    if len(ids) != len(docs):
        raise ValueError("duplicate doc_id in corpus")
    random.Random(seed).shuffle(ids)
    n_val = 0 if len(ids) < 2 else min(len(ids) - 1, round(val_frac * len(ids)))
    val_ids = set(ids[:n_val])
    train = [d for d in docs if d.doc_id not in val_ids]
    val = [d for d in docs if d.doc_id in val_ids]
    assert not {d.doc_id for d in train} & {d.doc_id for d in val}
    return train, val


def predict_examples(model: NeuScraperModel, examples: Sequence[Example], batch_size: int = 64) -> np.ndarray:
    """Primary-label probabilities for all nodes of ``examples``, concatenated."""
    model.eval()
    out = []
    for start in range(0, len(examples), batch_size):
        out.append(model.predict_proba([e.tokens for e in examples[start : start + batch_size]])[:, PRIMARY])
    return np.concatenate(out) if out else np.zeros(0)


def primary_f1(probs: np.ndarray, gold: np.ndarray, threshold: float = 0.5) -> float:
    pred = probs >= threshold
    gold = gold.astype(bool)
    tp = int((pred & gold).sum())
    fp = int((pred & ~gold).sum())
    fn = int((~pred & gold).sum())
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


def _param_groups(model: NeuScraperModel, weight_decay: float):
    decay, no_decay = [], []
    for name, p in model.named_parameters():
        (decay if p.ndim == 2 and "emb" not in name else no_decay).append(p)
    return [{"params": decay, "weight_decay": weight_decay}, {"params": no_decay, "weight_decay": 0.0}]


def train(
    corpus: Sequence[LabeledDocument],
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    tok_cfg: TokenizerConfig = TokenizerConfig(),
    val_docs: Sequence[LabeledDocument] | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> Checkpoint:
    """Fit a model and return the checkpoint with the best validation primary F1.

    Without ``val_docs`` a ``tcfg.val_frac`` share of ``corpus`` is held out.
    With no validation data at all, the last epoch is returned.
    """
    if not corpus:
        raise EmptyCorpus("training corpus is empty")
    if val_docs is None:
        train_docs, val_docs = split_corpus(corpus, tcfg.val_frac, tcfg.seed)
    else:
        train_docs = list(corpus)
        overlap = {d.doc_id for d in train_docs} & {d.doc_id for d in val_docs}
        if overlap:
            raise ValueError(f"train and validation share doc ids: {sorted(overlap)[:5]}")
    train_ex = prepare_examples(train_docs, mcfg.max_nodes, tok_cfg)
    val_ex = prepare_examples(val_docs, mcfg.max_nodes, tok_cfg)
    if not train_ex:
        raise EmptyCorpus("training corpus has no retained nodes")
    val_gold = np.concatenate([e.labels[:, PRIMARY] for e in val_ex]) if val_ex else np.zeros(0)

    torch.manual_seed(tcfg.seed)
    model = NeuScraperModel(mcfg, tok_cfg)
    opt = torch.optim.AdamW(_param_groups(model, tcfg.weight_decay), lr=tcfg.peak_lr, betas=tcfg.betas, eps=tcfg.eps)
    order_rng = np.random.default_rng(tcfg.seed)
    steps_per_epoch = math.ceil(len(train_ex) / tcfg.batch_size)
    total_steps = steps_per_epoch * tcfg.epochs
    log.info("training on %d chunks (%d docs), %d steps; %d validation docs",
             len(train_ex), len(train_docs), total_steps, len(val_docs))

    step, lr = 0, 0.0
    best_f1, best_state, best_epoch = -1.0, None, 0
    history = []
    for epoch in range(1, tcfg.epochs + 1):
        model.train()
        loss_sum, n_nodes = 0.0, 0
        perm = order_rng.permutation(len(train_ex))
        for start in range(0, len(perm), tcfg.batch_size):
            batch_ex = [train_ex[i] for i in perm[start : start + tcfg.batch_size]]
            step += 1
            lr = lr_at(step, total_steps, tcfg.peak_lr, tcfg.warmup_frac)
            for group in opt.param_groups:
                group["lr"] = lr
            logits = model(make_batch([e.tokens for e in batch_ex]))
            targets = torch.from_numpy(np.concatenate([e.labels for e in batch_ex]))
            loss = bce_with_logits_sum(logits, targets)
            if not torch.isfinite(loss):
                raise NonFiniteLoss(
                    f"loss={loss.item()} at epoch {epoch} step {step} lr={lr:.3g}; "
                    f"docs {[e.doc_id for e in batch_ex][:5]}"
                )
            opt.zero_grad(set_to_none=True)
            (loss / len(batch_ex)).backward()
            opt.step()
            loss_sum += loss.item()
            n_nodes += targets.shape[0]

        val_f1 = primary_f1(predict_examples(model, val_ex), val_gold, tcfg.threshold) if val_ex else None
        entry = {"epoch": epoch, "train_loss": loss_sum / (n_nodes * mcfg.n_labels),
                 "train_loss_sum": loss_sum, "val_f1_primary": val_f1, "lr_last": lr}
        history.append(entry)
        log.info("epoch %d: %s", epoch, json.dumps(entry))
        if on_epoch is not None:
            on_epoch(entry)
        score = val_f1 if val_f1 is not None else float(epoch)
        if score > best_f1:
            best_f1, best_epoch = score, epoch
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    model.eval()
    metrics = {
        "best_epoch": best_epoch,
        "val_f1_primary": history[best_epoch - 1]["val_f1_primary"],
        "history": history,
        "train_config": tcfg.to_dict(),
        "n_train_docs": len(train_docs),
        "n_val_docs": len(val_docs),
    }
    return Checkpoint.from_model(model, tcfg.seed, metrics)
