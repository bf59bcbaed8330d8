"""Hierarchical node classifier.

Two stacked transformer encoders: a one-layer token encoder that turns each
node's text into a vector (read out at the CLS position), and a multi-layer
encoder over the node vectors of a chunk. A small MLP head scores six labels
per node with independent sigmoids.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .errors import LengthMismatch, SequenceTooLong, ShapeMismatch
from .tokenizer import PAD_ID, TokenizerConfig

LABELS = ("primary", "heading", "title", "paragraph", "table", "list")
N_LABELS = len(LABELS)
PRIMARY = 0
LOGIT_CLAMP = 30.0


@dataclass(frozen=True)
class ModelConfig:
    d_node: int = 128
    d_model: int = 256
    n_layers: int = 3
    n_heads: int = 8
    max_nodes: int = 128  # nodes per chunk
    node_heads: int = 4
    ff_mult: int = 4
    n_labels: int = N_LABELS

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.d_node % self.node_heads:
            raise ValueError(f"d_node={self.d_node} not divisible by node_heads={self.node_heads}")
        if self.n_labels != N_LABELS:
            raise ValueError(f"n_labels is fixed at {N_LABELS}")
        if min(self.d_node, self.d_model, self.n_layers, self.max_nodes) < 1:
            raise ValueError("dimensions must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class EncoderLayer(nn.Module):
    """Pre-norm transformer encoder layer with a key padding mask."""

    def __init__(self, d: int, n_heads: int, d_ff: int):
        super().__init__()
        self.n_heads = n_heads
        self.norm1 = nn.LayerNorm(d)
        self.qkv = nn.Linear(d, 3 * d)
        self.out = nn.Linear(d, d)
        self.norm2 = nn.LayerNorm(d)
        self.ff1 = nn.Linear(d, d_ff)
        self.ff2 = nn.Linear(d_ff, d)

    def forward(self, x: Tensor, pad_mask: Tensor | None = None) -> Tensor:
        # x: (B, T, d); pad_mask: (B, T), True marks padding
        B, T, d = x.shape
        dh = d // self.n_heads
        q, k, v = self.qkv(self.norm1(x)).view(B, T, 3, self.n_heads, dh).permute(2, 0, 3, 1, 4)
        scores = (q @ k.transpose(-1, -2)) / math.sqrt(dh)
        if pad_mask is not None:
            scores = scores.masked_fill(pad_mask[:, None, None, :], float("-inf"))
        ctx = (scores.softmax(-1) @ v).transpose(1, 2).reshape(B, T, d)
        x = x + self.out(ctx)
        return x + self.ff2(F.gelu(self.ff1(self.norm2(x))))


class NodeEncoder(nn.Module):
    """Token embeddings + one encoder layer; returns the CLS output per node."""

    def __init__(self, tok_cfg: TokenizerConfig, d_node: int, n_heads: int, ff_mult: int = 4):
        super().__init__()
        self.tok_cfg = tok_cfg
        self.tok_emb = nn.Embedding(tok_cfg.vocab_size, d_node)
        self.pos_emb = nn.Embedding(tok_cfg.t_max, d_node)
        self.layer = EncoderLayer(d_node, n_heads, ff_mult * d_node)
        nn.init.normal_(self.tok_emb.weight, std=0.02)
        nn.init.normal_(self.pos_emb.weight, std=0.02)

    def forward(self, ids: Tensor, pad_mask: Tensor | None = None) -> Tensor:
        T = ids.shape[1]
        x = self.tok_emb(ids) + self.pos_emb.weight[:T]
        return self.layer(x, pad_mask)[:, 0]


class SequenceEncoder(nn.Module):
    """Projection of node vectors, chunk-local position embedding, then a stack of encoder layers."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.proj = nn.Linear(cfg.d_node, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_nodes, cfg.d_model)
        self.layers = nn.ModuleList(
            EncoderLayer(cfg.d_model, cfg.n_heads, cfg.ff_mult * cfg.d_model) for _ in range(cfg.n_layers)
        )
        self.norm = nn.LayerNorm(cfg.d_model)
        nn.init.normal_(self.pos_emb.weight, std=0.02)

    def forward(self, h: Tensor, pad_mask: Tensor | None = None) -> Tensor:
        L = h.shape[1]
        x = self.proj(h) + self.pos_emb.weight[:L]
        for layer in self.layers:
            x = layer(x, pad_mask)
        x = self.norm(x)
        if pad_mask is not None:
            x = x.masked_fill(pad_mask[..., None], 0.0)
        return x


class LabelHead(nn.Module):
    """Two-layer MLP producing clamped logits for the six labels."""

    def __init__(self, d_model: int, n_labels: int = N_LABELS):
        super().__init__()
        self.fc1 = nn.Linear(d_model, d_model)
        self.fc2 = nn.Linear(d_model, n_labels)

    def forward(self, e: Tensor) -> Tensor:
        return self.fc2(F.gelu(self.fc1(e))).clamp(-LOGIT_CLAMP, LOGIT_CLAMP)


@dataclass
class NodeBatch:
    """Token lists of several chunks, prepared for one forward pass.

    Identical token lists are encoded once; unique lists are sorted by length
    and split into buckets so padding stays small.
    """

    buckets: list[tuple[Tensor, Tensor]]  # (ids, pad_mask) per bucket
    inverse: Tensor  # (N,) row of each node in the concatenated bucket output
    flat_index: Tensor  # (N,) position of each node in the (B * L) padded layout
    node_pad_mask: Tensor  # (B, L)
    lengths: list[int]

    @property
    def n_nodes(self) -> int:
        return int(self.inverse.shape[0])


def make_batch(chunks: Sequence[Sequence[Sequence[int]]], bucket_tokens: int = 16384) -> NodeBatch:
    """Build a :class:`NodeBatch` from per-chunk lists of token id lists."""
    lengths = [len(c) for c in chunks]
    if not lengths or min(lengths) < 1:
        raise ValueError("every chunk needs at least one node")
    unique: dict[tuple[int, ...], int] = {}
    node_rows = []
    for chunk in chunks:
        for toks in chunk:
            node_rows.append(unique.setdefault(tuple(toks), len(unique)))
    keys = list(unique)
    order = sorted(range(len(keys)), key=lambda i: (len(keys[i]), i))
    rank = np.empty(len(keys), dtype=np.int64)
    rank[order] = np.arange(len(keys))

    buckets = []
    start = 0
    while start < len(order):
        stop = start + 1
        while stop < len(order) and (stop - start + 1) * len(keys[order[stop]]) <= bucket_tokens:
            stop += 1
        group = [keys[i] for i in order[start:stop]]
        T = len(group[-1])
        ids = torch.full((len(group), T), PAD_ID, dtype=torch.long)
        for r, toks in enumerate(group):
            ids[r, : len(toks)] = torch.tensor(toks, dtype=torch.long)
        mask = torch.arange(T)[None, :] >= torch.tensor([len(g) for g in group])[:, None]
        buckets.append((ids, mask))
        start = stop

    B, L = len(lengths), max(lengths)
    flat = torch.cat([b * L + torch.arange(n) for b, n in enumerate(lengths)])
    node_pad = torch.arange(L)[None, :] >= torch.tensor(lengths)[:, None]
    return NodeBatch(buckets, torch.from_numpy(rank[node_rows]), flat, node_pad, lengths)


class NeuScraperModel(nn.Module):
    def __init__(self, cfg: ModelConfig, tok_cfg: TokenizerConfig = TokenizerConfig()):
        super().__init__()
        self.cfg = cfg
        self.tok_cfg = tok_cfg
        self.node_encoder = NodeEncoder(tok_cfg, cfg.d_node, cfg.node_heads, cfg.ff_mult)
        self.sequence = SequenceEncoder(cfg)
        self.head = LabelHead(cfg.d_model, cfg.n_labels)

    def encode_nodes(self, batch: NodeBatch) -> Tensor:
        """Node vectors (N, d_node) in chunk order."""
        vecs = torch.cat([self.node_encoder(ids, mask) for ids, mask in batch.buckets])
        return vecs[batch.inverse]

    def forward(self, batch: NodeBatch) -> Tensor:
        """Clamped logits (N, 6) for every node of the batch, in chunk order."""
        if max(batch.lengths) > self.cfg.max_nodes:
            raise SequenceTooLong(f"chunk of {max(batch.lengths)} nodes exceeds max_nodes={self.cfg.max_nodes}")
        h = self.encode_nodes(batch)
        B, L = batch.node_pad_mask.shape
        padded = h.new_zeros(B * L, h.shape[1]).index_copy(0, batch.flat_index, h).view(B, L, -1)
        e = self.sequence(padded, batch.node_pad_mask)
        return self.head(e).reshape(B * L, -1)[batch.flat_index]

    def predict_proba(self, chunks: Sequence[Sequence[Sequence[int]]]) -> np.ndarray:
        """Sigmoid probabilities (N, 6) as float64, nodes in chunk order."""
        if not chunks:
            return np.zeros((0, N_LABELS))
        with torch.inference_mode():
            logits = self(make_batch(chunks))
        return torch.sigmoid(logits.double()).numpy()


def _check_tokens(tokens: Sequence[int], cfg: TokenizerConfig):
    if not 1 <= len(tokens) <= cfg.t_max:
        raise ShapeMismatch(f"token list length {len(tokens)} outside [1, {cfg.t_max}]")
    if min(tokens) < 0 or max(tokens) >= cfg.vocab_size:
        raise ShapeMismatch(f"token id outside [0, {cfg.vocab_size})")


def encode_node(tokens: Sequence[int], encoder: NodeEncoder) -> Tensor:
    """Encode one node's tokens into a vector of size ``d_node``."""
    _check_tokens(tokens, encoder.tok_cfg)
    ids = torch.tensor([list(tokens)], dtype=torch.long)
    return encoder(ids)[0]


def encode_sequence(h: Tensor, encoder: SequenceEncoder) -> Tensor:
    """Encode the node vectors (n, d_node) of one chunk into (n, d_model)."""
    cfg = encoder.cfg
    if h.dim() != 2 or h.shape[1] != cfg.d_node:
        raise ShapeMismatch(f"expected (n, {cfg.d_node}) node vectors, got {tuple(h.shape)}")
    if h.shape[0] > cfg.max_nodes:
        raise SequenceTooLong(f"{h.shape[0]} nodes exceeds max_nodes={cfg.max_nodes}")
    if h.shape[0] == 0:
        raise ShapeMismatch("empty node sequence")
    return encoder(h[None])[0]


def predict_labels(e: Tensor, head: LabelHead) -> Tensor:
    """Label probabilities (float64) for encoded node(s); the last axis must be d_model."""
    if e.shape[-1] != head.fc1.in_features:
        raise ShapeMismatch(f"expected last dim {head.fc1.in_features}, got {e.shape[-1]}")
    return torch.sigmoid(head(e).double())


def bce_with_logits_sum(logits: Tensor, targets: Tensor) -> Tensor:
    """Summed binary cross-entropy from (already clamped) logits."""
    return (F.softplus(logits) - targets * logits).sum()


def compute_loss(p, y, reduction: str = "sum") -> float:
    """Binary cross-entropy of probabilities ``p`` against labels ``y``, both (n, 6).

    ``reduction="sum"`` gives the total over nodes and labels; ``"mean"``
    divides it by ``6 * n``.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise LengthMismatch(f"probabilities {p.shape} vs labels {y.shape}")
    if p.ndim != 2 or p.shape[1] != N_LABELS or p.shape[0] < 1:
        raise LengthMismatch(f"expected (n>=1, {N_LABELS}) arrays, got {p.shape}")
    total = float(-(y * np.log(p) + (1.0 - y) * np.log1p(-p)).sum())
    if reduction == "sum":
        return total
    if reduction == "mean":
        return total / p.size
    raise ValueError(f"unknown reduction {reduction!r}")
