"""Post-training 8-bit weight quantization.

Every ``nn.Linear`` weight matrix is stored as 8-bit levels with one affine
(scale, zero point) pair per tensor. Embeddings, biases and layer norms stay
in float32. Two execution backends share the same stored levels:

``reference``
    dequantizes the weight on every call and runs a float matmul; this is the
    exact semantics of the stored model.
``int8``
    runs the CPU int8 GEMM kernel, quantizing activations dynamically per
    call. Faster, and numerically close to ``reference``.
"""
from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .checkpoint import Checkpoint
from .model import NeuScraperModel

MODES = {"signed8": (-128, 127, np.int8), "unsigned8": (0, 255, np.uint8)}
BACKENDS = ("reference", "int8")


@dataclass
class QuantizedTensor:
    levels: np.ndarray
    scale: float
    zero_point: int
    mode: str

    def dequantize(self) -> np.ndarray:
        return (np.float32(self.scale) * (self.levels.astype(np.float32) - np.float32(self.zero_point))).astype(np.float32)


def quantize_tensor(w: np.ndarray, mode: str = "signed8") -> QuantizedTensor:
    """Per-tensor affine quantization of ``w``.

    The float range is widened to include 0 so the zero point is an
    in-range integer. A constant tensor is stored exactly with levels in
    {-1, 0, 1} (or {0, 1} around a shifted zero point for unsigned8).
    """
    qmin, qmax, dtype = MODES[mode]
    w = np.asarray(w, dtype=np.float32)
    c = float(w.flat[0]) if w.size else 0.0
    if not w.size or np.all(w == c):
        scale = abs(c) if c != 0.0 else 1.0
        zp = 1 if (c < 0 and qmin == 0) else 0
        level = zp + int(np.sign(c))
        return QuantizedTensor(np.full(w.shape, level, dtype=dtype), scale, zp, mode)
    lo, hi = min(float(w.min()), 0.0), max(float(w.max()), 0.0)
    scale = (hi - lo) / 255.0
    zp = int(np.clip(round(qmin - lo / scale), qmin, qmax))
    levels = np.clip(np.rint(w / np.float32(scale)) + zp, qmin, qmax).astype(dtype)
    return QuantizedTensor(levels, scale, zp, mode)


class QuantLinear(nn.Module):
    def __init__(self, qt: QuantizedTensor, bias: torch.Tensor | None, backend: str = "int8"):
        super().__init__()
        if backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        self.qt = qt
        self.backend = backend
        self.out_features, self.in_features = qt.levels.shape
        self.register_buffer("levels", torch.from_numpy(qt.levels.astype(np.int16)))
        self.register_buffer("bias", None if bias is None else bias.detach().clone().float())
        self._packed = self._pack() if backend == "int8" else None

    def _pack(self):
        # the kernel takes signed levels; unsigned levels shift by 128 together with the zero point
        shift = 128 if self.qt.mode == "unsigned8" else 0
        signed = torch.from_numpy((self.qt.levels.astype(np.int16) - shift).astype(np.int8))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            torch.backends.quantized.engine = _engine()
            qw = torch._make_per_tensor_quantized_tensor(signed, self.qt.scale, self.qt.zero_point - shift)
            return torch.ops.quantized.linear_prepack(qw, self.bias)

    def dequantized_weight(self) -> torch.Tensor:
        return float(self.qt.scale) * (self.levels.float() - float(self.qt.zero_point))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self._packed is None:
            return F.linear(x, self.dequantized_weight(), self.bias)
        shape = x.shape
        y = torch.ops.quantized.linear_dynamic(x.reshape(-1, shape[-1]).float().contiguous(), self._packed)
        return y.reshape(*shape[:-1], self.out_features)


def _engine() -> str:
    engines = torch.backends.quantized.supported_engines
    for name in ("x86", "fbgemm"):
        if name in engines:
            return name
    raise RuntimeError(f"no x86 int8 engine available (have {engines}); use backend='reference'")


class QuantizedModel(NeuScraperModel):
    """A :class:`NeuScraperModel` whose linear layers hold 8-bit weights."""

    mode: str
    backend: str

    def quantized_tensors(self) -> dict[str, QuantizedTensor]:
        return {f"{name}.weight": m.qt for name, m in self.named_modules() if isinstance(m, QuantLinear)}

    def to_checkpoint(self, seed: int = 0, metrics: dict | None = None) -> Checkpoint:
        tensors, params = {}, {}
        for name, m in self.named_modules():
            if isinstance(m, QuantLinear):
                tensors[f"{name}.weight"] = m.qt.levels
                params[f"{name}.weight"] = [m.qt.scale, m.qt.zero_point]
                if m.bias is not None:
                    tensors[f"{name}.bias"] = m.bias.numpy().copy()
        for k, v in self.state_dict().items():
            if k not in tensors and not k.endswith(".levels"):
                tensors[k] = v.detach().float().numpy().copy()
        return Checkpoint(self.cfg, self.tok_cfg, tensors, seed, dict(metrics or {}),
                          {"mode": self.mode, "params": params})


def _swap_linears(model: NeuScraperModel, qts: dict[str, QuantizedTensor], backend: str) -> None:
    for name, module in list(model.named_modules()):
        for child_name, child in list(module.named_children()):
            full = f"{name}.{child_name}" if name else child_name
            if isinstance(child, nn.Linear):
                setattr(module, child_name, QuantLinear(qts[f"{full}.weight"], child.bias, backend))


def quantize(checkpoint: Checkpoint | NeuScraperModel, mode: str = "signed8", backend: str = "int8") -> QuantizedModel:
    """Quantize every linear weight of a float checkpoint or model."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {sorted(MODES)}")
    float_model = checkpoint.build_model() if isinstance(checkpoint, Checkpoint) else copy.deepcopy(checkpoint)
    qts = {
        f"{name}.weight": quantize_tensor(m.weight.detach().numpy(), mode)
        for name, m in float_model.named_modules()
        if isinstance(m, nn.Linear)
    }
    return _finish(float_model, qts, mode, backend)


def load_quantized(ckpt: Checkpoint, backend: str = "int8") -> QuantizedModel:
    """Rebuild a quantized model from a checkpoint written by :meth:`QuantizedModel.to_checkpoint`."""
    if ckpt.quantization is None:
        raise ValueError("checkpoint is not quantized")
    mode = ckpt.quantization["mode"]
    params = ckpt.quantization["params"]
    model = NeuScraperModel(ckpt.model_config, ckpt.tokenizer_config)
    state = model.state_dict()
    qts = {}
    for k in state:
        if k in params:
            scale, zp = params[k]
            qts[k] = QuantizedTensor(np.asarray(ckpt.tensors[k]).astype(MODES[mode][2]), float(scale), int(zp), mode)
            state[k] = torch.from_numpy(qts[k].dequantize())
        else:
            state[k] = torch.from_numpy(np.asarray(ckpt.tensors[k], dtype=np.float32))
    model.load_state_dict(state)
    return _finish(model, qts, mode, backend)


def _finish(model: NeuScraperModel, qts: dict[str, QuantizedTensor], mode: str, backend: str) -> QuantizedModel:
    _swap_linears(model, qts, backend)
    model.__class__ = QuantizedModel
    model.mode = mode
    model.backend = backend
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


def load_model(ckpt: Checkpoint, backend: str = "int8") -> NeuScraperModel:
    """Float or quantized model, whichever the checkpoint holds."""
    return ckpt.build_model() if ckpt.quantization is None else load_quantized(ckpt, backend)
