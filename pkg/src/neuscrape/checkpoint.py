"""Self-describing checkpoint files.

Layout (all integers little-endian)::

    b"NSCP"                      magic
    u32                          format version
    u32 + bytes                  JSON header (configs, seed, metrics, quantization)
    u32                          tensor count
    per tensor:
        u16 + bytes              name (UTF-8)
        u8                       dtype code (0=float32, 1=int8, 2=uint8)
        u8 + u32 * ndim          shape
        u64                      payload size in bytes
    raw payloads                 in directory order
    u32                          CRC-32 of everything above
"""
from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import CorruptCheckpoint, VersionMismatch
from .model import ModelConfig, NeuScraperModel
from .tokenizer import TokenizerConfig

MAGIC = b"NSCP"
FORMAT_VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("i1"), 2: np.dtype("u1")}
_CODES = {v: k for k, v in _DTYPES.items()}


@dataclass
class Checkpoint:
    model_config: ModelConfig
    tokenizer_config: TokenizerConfig
    tensors: dict[str, np.ndarray]
    seed: int = 0
    metrics: dict = field(default_factory=dict)
    # {"mode": "signed8"|"unsigned8", "params": {tensor_name: [scale, zero_point]}}
    quantization: dict | None = None

    @classmethod
    def from_model(cls, model: NeuScraperModel, seed: int = 0, metrics: dict | None = None) -> "Checkpoint":
        tensors = {k: v.detach().cpu().to(torch.float32).numpy().copy() for k, v in model.state_dict().items()}
        return cls(model.cfg, model.tok_cfg, tensors, seed, dict(metrics or {}))

    def build_model(self) -> NeuScraperModel:
        """Instantiate a float model; quantized checkpoints go through :func:`neuscrape.quantize.load_quantized`."""
        if self.quantization is not None:
            raise ValueError("checkpoint is quantized; use neuscrape.quantize.load_quantized")
        model = NeuScraperModel(self.model_config, self.tokenizer_config)
        state = {k: torch.from_numpy(np.array(v, dtype=np.float32)) for k, v in self.tensors.items()}
        model.load_state_dict(state)
        model.eval()
        return model

    def header(self) -> dict:
        return {
            "model_config": self.model_config.to_dict(),
            "tokenizer_config": {"vocab_size": self.tokenizer_config.vocab_size, "t_max": self.tokenizer_config.t_max},
            "seed": self.seed,
            "metrics": self.metrics,
            "quantization": self.quantization,
        }


def dumps(ckpt: Checkpoint) -> bytes:
    header = json.dumps(ckpt.header(), sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header, struct.pack("<I", len(ckpt.tensors))]
    payloads = []
    for name, arr in ckpt.tensors.items():
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<") if arr.dtype.kind == "f" else arr.dtype
        if dt not in _CODES:
            raise TypeError(f"unsupported dtype {arr.dtype} for tensor {name!r}")
        data = np.ascontiguousarray(arr, dtype=dt).tobytes()
        bname = name.encode("utf-8")
        parts.append(struct.pack("<H", len(bname)) + bname)
        parts.append(struct.pack("<BB", _CODES[dt], arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(struct.pack("<Q", len(data)))
        payloads.append(data)
    body = b"".join(parts + payloads)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptCheckpoint(f"unexpected end of data at byte {self.pos} (wanted {n} more)")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise CorruptCheckpoint("bad magic; not a checkpoint file")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format version {version}, this build reads version {FORMAT_VERSION}")
    if len(buf) < 4 or zlib.crc32(buf[:-4]) != struct.unpack("<I", buf[-4:])[0]:
        raise CorruptCheckpoint("checksum mismatch (truncated or modified file)")
    (hlen,) = r.unpack("<I")
    try:
        header = json.loads(r.take(hlen).decode("utf-8"))
        mcfg = ModelConfig.from_dict(header["model_config"])
        tcfg = TokenizerConfig(**header["tokenizer_config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"unreadable header: {exc}") from exc

    (count,) = r.unpack("<I")
    directory = []
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise CorruptCheckpoint(f"unknown dtype code {code} for {name!r}")
        shape = r.unpack(f"<{ndim}I")
        (nbytes,) = r.unpack("<Q")
        expect = int(np.prod(shape, dtype=np.int64)) * _DTYPES[code].itemsize
        if nbytes != expect:
            raise CorruptCheckpoint(f"tensor {name!r}: payload {nbytes} bytes, shape needs {expect}")
        directory.append((name, _DTYPES[code], shape, nbytes))
    tensors = {}
    for name, dt, shape, nbytes in directory:
        tensors[name] = np.frombuffer(r.take(nbytes), dtype=dt).reshape(shape).copy()
    if r.pos != len(buf) - 4:
        raise CorruptCheckpoint("trailing bytes after tensor data")
    return Checkpoint(mcfg, tcfg, tensors, int(header.get("seed", 0)), header.get("metrics") or {},
                      header.get("quantization"))


def save_checkpoint(ckpt: Checkpoint | NeuScraperModel, path: str | os.PathLike) -> None:
    """Write atomically; a model is converted with its own ``to_checkpoint`` or :meth:`Checkpoint.from_model`."""
    if isinstance(ckpt, NeuScraperModel):
        ckpt = ckpt.to_checkpoint() if hasattr(ckpt, "to_checkpoint") else Checkpoint.from_model(ckpt)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(ckpt))
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    return loads(Path(path).read_bytes())
