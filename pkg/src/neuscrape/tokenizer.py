"""Deterministic hash tokenizer for node text.

Words are whitespace-delimited and lowercased; each one is hashed with
64-bit FNV-1a over its UTF-8 bytes and folded into the non-reserved part of
the vocabulary. No vocabulary file is needed and any language works.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

CLS_ID = 0
PAD_ID = 1
UNK_ID = 2
N_RESERVED = 3

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class TokenizerConfig:
    vocab_size: int = 32768
    t_max: int = 64

    def __post_init__(self):
        if self.vocab_size <= N_RESERVED:
            raise ValueError(f"vocab_size must exceed {N_RESERVED}, got {self.vocab_size}")
        if self.t_max < 2:
            raise ValueError(f"t_max must be >= 2, got {self.t_max}")


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


@lru_cache(maxsize=1 << 18)
def _word_id(word: str, vocab_size: int) -> int:
    return N_RESERVED + fnv1a_64(word.encode("utf-8")) % (vocab_size - N_RESERVED)


def tokenize(text: str, cfg: TokenizerConfig = TokenizerConfig()) -> list[int]:
    """Map normalized node text to token ids, ``[CLS, w1, w2, ...]``.

    The result is truncated to ``cfg.t_max`` ids including the leading CLS.
    """
    ids = [CLS_ID]
    budget = cfg.t_max - 1
    for word in text.lower().split():
        if budget == 0:
            break
        ids.append(_word_id(word, cfg.vocab_size))
        budget -= 1
    return ids
