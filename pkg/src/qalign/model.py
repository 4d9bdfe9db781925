"""Seeded feed-forward stand-in encoder, its W8A8 counterpart and (de)serialization.

Each layer is position-wise: ``h <- h + gelu(h @ W + b)``. There is no
attention, so every sequence position is processed independently and the
``(B, L, H)`` shape contract is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from . import container
from .container import TensorRecord
from .errors import CalibrationError, FormatError, ShapeError, VocabularyError
from .numerics import DTYPE
from .quant import (
    DEFAULT_EPS,
    PER_OUTPUT_CHANNEL,
    PER_TENSOR,
    QMAX,
    CalibrationStats,
    QuantizedMatrix,
    SmoothingConfig,
    compute_scale,
    dequantize,
    quantize,
    quantize_with_scales,
    quantized_linear,
    smooth_scales,
)

GELU_TANH = "gelu_tanh"
STATIC = "static"
DYNAMIC = "dynamic"
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.float64)
    return (0.5 * x * (1.0 + np.tanh(_SQRT_2_OVER_PI * (x + 0.044715 * x**3)))).astype(DTYPE)


@dataclass(eq=False)
class DenseLayer:
    weight: np.ndarray  # (D, D), input channels on rows
    bias: np.ndarray

    def linear(self, h: np.ndarray, act_scale=None) -> np.ndarray:
        y = h.astype(np.float64) @ self.weight.astype(np.float64) + self.bias
        return y.astype(DTYPE)


@dataclass(eq=False)
class QuantLayer:
    """Smoothed W8A8 linear: ``quant(h / smooth) @ quant(W * smooth) + b``."""

    weight: QuantizedMatrix
    bias: np.ndarray
    smooth: np.ndarray
    act_scale: Optional[np.float32] = None  # None: recomputed per batch

    def smoothed_input(self, h: np.ndarray) -> np.ndarray:
        return (h.astype(np.float64) / self.smooth.astype(np.float64)).astype(DTYPE)

    def linear(self, h: np.ndarray, act_scale) -> np.ndarray:
        x_q = quantize_with_scales(self.smoothed_input(h), act_scale, PER_TENSOR)
        return (quantized_linear(x_q, self.weight).astype(np.float64) + self.bias).astype(DTYPE)


Layer = Union[DenseLayer, QuantLayer]


@dataclass(eq=False)
class EncoderModel:
    embedding: Union[np.ndarray, QuantizedMatrix]
    layers: list[Layer] = field(default_factory=list)
    seed: int = 0
    nonlinearity: str = GELU_TANH

    def __post_init__(self):
        self._table = (
            dequantize(self.embedding) if isinstance(self.embedding, QuantizedMatrix) else np.asarray(self.embedding, DTYPE)
        )
        if self._table.ndim != 2:
            raise ShapeError("embedding table must be 2-D")
        d = self.dim
        for i, layer in enumerate(self.layers):
            shape = layer.weight.shape
            if shape != (d, d):
                raise ShapeError(f"layer {i} weight is {shape}, expected ({d}, {d})")
        if self.nonlinearity != GELU_TANH:
            raise ValueError(f"unsupported nonlinearity {self.nonlinearity!r}")

    @property
    def vocab_size(self) -> int:
        return self._table.shape[0]

    @property
    def dim(self) -> int:
        return self._table.shape[1]

    @property
    def quantized(self) -> bool:
        return any(isinstance(l, QuantLayer) for l in self.layers)

    @property
    def act_policy(self) -> Optional[str]:
        if not self.quantized:
            return None
        return DYNAMIC if any(l.act_scale is None for l in self.layers) else STATIC

    def layer_name(self, i: int) -> str:
        return f"layers.{i}"

    def lookup(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            bad = ids[(ids < 0) | (ids >= self.vocab_size)].flat[0]
            raise VocabularyError(f"token id {bad} outside vocabulary of size {self.vocab_size}")
        return self._table[ids]

    def forward(self, ids: np.ndarray, capture: Optional[dict] = None) -> np.ndarray:
        """Run a ``(B, L)`` id grid through the stack, returning ``(B, L, D)``.

        The matmuls run one sequence at a time so each call sees the same
        ``(L, D)`` shape whatever the batch size, which keeps results
        bit-identical under re-batching. ``capture`` (if given) receives each
        layer's input under its layer name.
        """
        h = self.lookup(ids).astype(DTYPE)
        for i, layer in enumerate(self.layers):
            if capture is not None:
                capture[self.layer_name(i)] = h.copy()
            act_scale = None
            if isinstance(layer, QuantLayer):
                act_scale = layer.act_scale
                if act_scale is None:
                    peak = float(np.abs(layer.smoothed_input(h)).max()) if h.size else 0.0
                    act_scale = np.float32(max(peak, DEFAULT_EPS) / QMAX)
            out = np.empty_like(h)
            for b in range(h.shape[0]):
                out[b] = gelu(layer.linear(h[b], act_scale))
            h = (h.astype(np.float64) + out).astype(DTYPE)
        return h

    def to_records(self) -> list[TensorRecord]:
        recs = [TensorRecord("meta.seed", np.array([self.seed], dtype="<i8").view(np.int8))]
        if isinstance(self.embedding, QuantizedMatrix):
            recs.append(TensorRecord("embedding", self.embedding.qvalues, self.embedding.scales))
        else:
            recs.append(TensorRecord("embedding", np.asarray(self.embedding, DTYPE)))
        for i, layer in enumerate(self.layers):
            name = self.layer_name(i)
            if isinstance(layer, QuantLayer):
                recs.append(TensorRecord(f"{name}.weight", layer.weight.qvalues, layer.weight.scales))
                recs.append(TensorRecord(f"{name}.smooth", layer.smooth.astype(DTYPE)))
                if layer.act_scale is not None:
                    recs.append(TensorRecord(f"{name}.act_scale", np.array([layer.act_scale], DTYPE)))
            else:
                recs.append(TensorRecord(f"{name}.weight", layer.weight.astype(DTYPE)))
            recs.append(TensorRecord(f"{name}.bias", layer.bias.astype(DTYPE)))
        return recs

    @classmethod
    def from_records(cls, records: Sequence[TensorRecord]) -> "EncoderModel":
        by_name = {r.name: r for r in records}
        try:
            seed = int(by_name["meta.seed"].data.view("<i8")[0])
            emb = by_name["embedding"]
        except KeyError as exc:
            raise FormatError(f"model container lacks record {exc}") from None
        embedding = _record_matrix(emb)
        layers: list[Layer] = []
        i = 0
        while f"layers.{i}.weight" in by_name:
            if f"layers.{i}.bias" not in by_name:
                raise FormatError(f"model container lacks record 'layers.{i}.bias'")
            name = f"layers.{i}"
            w = by_name[f"{name}.weight"]
            bias = by_name[f"{name}.bias"].data.astype(DTYPE)
            if w.data.dtype == np.int8:
                if f"{name}.smooth" not in by_name:
                    raise FormatError(f"model container lacks record '{name}.smooth'")
                act = by_name.get(f"{name}.act_scale")
                layers.append(
                    QuantLayer(
                        _record_matrix(w),
                        bias,
                        by_name[f"{name}.smooth"].data.astype(DTYPE),
                        None if act is None else np.float32(act.data[0]),
                    )
                )
            else:
                layers.append(DenseLayer(w.data.astype(DTYPE), bias))
            i += 1
        return cls(embedding, layers, seed)

    def to_bytes(self) -> bytes:
        return container.dumps(self.to_records())

    @classmethod
    def from_bytes(cls, buf: bytes) -> "EncoderModel":
        return cls.from_records(container.loads(buf))

    def save(self, path) -> int:
        return container.save(path, self.to_records())

    @classmethod
    def load(cls, path) -> "EncoderModel":
        return cls.from_records(container.load(path))


def _record_matrix(rec: TensorRecord):
    if rec.data.dtype == np.int8:
        return QuantizedMatrix(rec.data, rec.scales, PER_OUTPUT_CHANNEL if rec.scales.size == rec.data.shape[1] else PER_TENSOR)
    return rec.data.astype(DTYPE)


def generate_model(
    vocab_size: int = 4096,
    dim: int = 64,
    n_layers: int = 2,
    seed: int = 42,
    outlier_channels: int = 2,
    outlier_scale: float = 6.0,
) -> EncoderModel:
    """Build a seeded FP encoder.

    Embeddings are uniform in [-1, 1] with ``outlier_channels`` randomly
    chosen columns multiplied by ``outlier_scale`` to mimic the activation
    outliers of real encoders. Row 0 (padding) is zero. Layer weights are
    uniform in [-1/sqrt(D), 1/sqrt(D)]; biases start at zero so padded
    positions stay exactly zero through the stack.
    """
    if vocab_size < 2 or dim < 1 or n_layers < 0:
        raise ValueError("need vocab_size >= 2, dim >= 1, n_layers >= 0")
    rng = np.random.default_rng(seed)
    emb = rng.uniform(-1.0, 1.0, size=(vocab_size, dim))
    if outlier_channels:
        cols = rng.choice(dim, size=min(outlier_channels, dim), replace=False)
        emb[:, cols] *= outlier_scale
    emb[0] = 0.0
    bound = 1.0 / math.sqrt(dim)
    layers = [
        DenseLayer(rng.uniform(-bound, bound, size=(dim, dim)).astype(DTYPE), np.zeros(dim, DTYPE))
        for _ in range(n_layers)
    ]
    return EncoderModel(emb.astype(DTYPE), layers, seed)


def quantize_model(
    model: EncoderModel,
    cfg: SmoothingConfig,
    stats: Union[Mapping[str, CalibrationStats], Sequence[CalibrationStats]],
    act_policy: str = STATIC,
    quantize_embedding: bool = True,
    per_tensor_weights: bool = False,
) -> EncoderModel:
    """Convert every linear layer to smoothed W8A8.

    Weights are smoothed then quantized per output channel; activations are
    quantized per tensor with a scale fixed from ``stats`` (static) or taken
    from each batch (dynamic). The embedding table is quantized per column
    unless ``quantize_embedding`` is false. ``per_tensor_weights`` forces one
    shared weight scale per layer (stored as equal per-column scales).
    """
    if act_policy not in (STATIC, DYNAMIC):
        raise ValueError(f"act_policy must be {STATIC!r} or {DYNAMIC!r}")
    if model.quantized:
        raise ValueError("model is already quantized")
    if not isinstance(stats, Mapping):
        stats = {s.name: s for s in stats}
    layers: list[Layer] = []
    for i, layer in enumerate(model.layers):
        name = model.layer_name(i)
        st = stats.get(name)
        if st is None:
            raise CalibrationError(f"no calibration stats for layer {name!r}")
        if st.act_max.size != model.dim:
            raise CalibrationError(f"stats for layer {name!r} cover {st.act_max.size} channels, layer has {model.dim}")
        s = smooth_scales(st, cfg)
        w_hat = (layer.weight.astype(np.float64) * s.astype(np.float64)[:, None]).astype(DTYPE)
        act_scale = None
        if act_policy == STATIC:
            peak = float(np.max(st.act_max / s.astype(np.float64))) if st.act_max.size else 0.0
            act_scale = np.float32(max(peak, cfg.eps) / QMAX)
        if per_tensor_weights:
            shared = compute_scale(w_hat, PER_TENSOR, cfg.eps)
            w_q = quantize_with_scales(w_hat, np.repeat(shared, model.dim), PER_OUTPUT_CHANNEL)
        else:
            w_q = quantize(w_hat, PER_OUTPUT_CHANNEL, cfg.eps)
        layers.append(QuantLayer(w_q, layer.bias.copy(), s, act_scale))
    emb = model.embedding
    if quantize_embedding and not isinstance(emb, QuantizedMatrix):
        emb = quantize(emb, PER_OUTPUT_CHANNEL, cfg.eps)
    return EncoderModel(emb, layers, model.seed, model.nonlinearity)
