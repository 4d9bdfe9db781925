"""Symmetric INT8 quantization, quantized linear kernels and SmoothQuant-style
scale migration.

Conventions:
    * activations ``x`` are ``(M, K)``, weights ``w`` are ``(K, N)`` and the
      linear map is ``x @ w``;
    * per-channel scales always index columns: output channels of ``w``
      (``Axis.OUTPUT``) or input channels of ``x`` (``Axis.INPUT``);
    * values are clamped to ``[-127, 127]`` with zero point 0.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DomainError, FormatError, SchemeError, ShapeError
from .numerics import DTYPE, as_matrix

QMAX = 127
DEFAULT_EPS = 1e-8


class Kind(str, enum.Enum):
    PER_TENSOR = "per_tensor"
    PER_CHANNEL = "per_channel"


class Axis(str, enum.Enum):
    OUTPUT = "output_channel"  # weight columns
    INPUT = "input_channel"  # activation columns


@dataclass(frozen=True)
class QuantScheme:
    kind: Kind
    axis: Optional[Axis] = None

    def __post_init__(self):
        if (self.kind is Kind.PER_CHANNEL) != (self.axis is not None):
            raise SchemeError(f"axis must be given iff kind is per-channel (kind={self.kind}, axis={self.axis})")

    @classmethod
    def per_tensor(cls) -> "QuantScheme":
        return cls(Kind.PER_TENSOR)

    @classmethod
    def per_channel(cls, axis: Axis = Axis.OUTPUT) -> "QuantScheme":
        return cls(Kind.PER_CHANNEL, axis)


PER_TENSOR = QuantScheme.per_tensor()
PER_OUTPUT_CHANNEL = QuantScheme.per_channel(Axis.OUTPUT)
PER_INPUT_CHANNEL = QuantScheme.per_channel(Axis.INPUT)


@dataclass(frozen=True, eq=False)
class QuantizedMatrix:
    """INT8 values plus the float32 scales that map them back to reals."""

    qvalues: np.ndarray
    scales: np.ndarray
    scheme: QuantScheme
    zero_point: int = field(default=0, init=False)

    def __post_init__(self):
        q = np.asarray(self.qvalues)
        s = np.asarray(self.scales, dtype=DTYPE).reshape(-1)
        if q.ndim != 2:
            raise ShapeError(f"qvalues must be 2-D, got shape {q.shape}")
        if q.dtype != np.int8:
            if np.any(np.abs(q) > QMAX):
                raise DomainError("qvalues outside [-127, 127]")
            q = q.astype(np.int8)
        elif np.any(q == -128):
            raise DomainError("qvalue -128 is outside the symmetric range")
        expected = 1 if self.scheme.kind is Kind.PER_TENSOR else q.shape[1]
        if s.size != expected:
            raise ShapeError(f"{self.scheme.kind.value} scheme needs {expected} scale(s), got {s.size}")
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise DomainError("scales must be positive and finite")
        object.__setattr__(self, "qvalues", q)
        object.__setattr__(self, "scales", s)

    @property
    def shape(self) -> tuple[int, int]:
        return self.qvalues.shape

    def broadcast_scales(self) -> np.ndarray:
        if self.scheme.kind is Kind.PER_TENSOR:
            return self.scales.reshape(1, 1)
        return self.scales.reshape(1, -1)


@dataclass(frozen=True)
class SmoothingConfig:
    alpha: float = 0.5
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True, eq=False)
class CalibrationStats:
    """Per-input-channel max magnitudes of one linear layer's operands."""

    act_max: np.ndarray
    wt_max: np.ndarray
    name: str = ""

    def __post_init__(self):
        a = np.asarray(self.act_max, dtype=np.float64).reshape(-1)
        w = np.asarray(self.wt_max, dtype=np.float64).reshape(-1)
        if a.shape != w.shape:
            raise ShapeError(f"act_max has {a.size} channels but wt_max has {w.size}")
        if np.any(a < 0) or np.any(w < 0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(w))):
            raise DomainError("calibration maxima must be finite and non-negative")
        object.__setattr__(self, "act_max", a)
        object.__setattr__(self, "wt_max", w)

    @classmethod
    def from_operands(cls, x, w, name: str = "") -> "CalibrationStats":
        x = as_matrix(x, "x")
        w = as_matrix(w, "w")
        return cls(np.abs(x).max(axis=0), np.abs(w).max(axis=1), name)


def _round_half_away(v: np.ndarray) -> np.ndarray:
    return np.sign(v) * np.floor(np.abs(v) + 0.5)


def compute_scale(m, scheme: QuantScheme, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Return the float32 scale vector for ``m`` under ``scheme``.

    Per-tensor gives a single scale, per-channel one scale per column.
    """
    m = np.abs(as_matrix(m).astype(np.float64))
    if scheme.kind is Kind.PER_TENSOR:
        peak = np.array([m.max() if m.size else 0.0])
    else:
        peak = m.max(axis=0) if m.shape[0] else np.zeros(m.shape[1])
    return (np.maximum(peak, eps) / QMAX).astype(DTYPE)


def quantize_with_scales(m, scales, scheme: QuantScheme) -> QuantizedMatrix:
    m = as_matrix(m)
    s = np.asarray(scales, dtype=DTYPE).reshape(-1)
    bs = s.reshape(1, 1) if scheme.kind is Kind.PER_TENSOR else s.reshape(1, -1)
    q = np.clip(_round_half_away(m.astype(np.float64) / bs.astype(np.float64)), -QMAX, QMAX)
    return QuantizedMatrix(q.astype(np.int8), s, scheme)


def quantize(m, scheme: QuantScheme, eps: float = DEFAULT_EPS) -> QuantizedMatrix:
    return quantize_with_scales(m, compute_scale(m, scheme, eps), scheme)


def dequantize(q: QuantizedMatrix) -> np.ndarray:
    return (q.qvalues.astype(np.float64) * q.broadcast_scales().astype(np.float64)).astype(DTYPE)


def int_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact int8 x int8 product with int32 accumulation.

    Each partial sum is an integer bounded by 127**2 * K, which float64
    represents exactly for any K that fits int32, so BLAS gives the exact
    integer result regardless of summation order.
    """
    if a.shape[1] >= 2**31 // QMAX**2:
        raise ShapeError(f"inner dimension {a.shape[1]} would overflow int32 accumulation")
    return (a.astype(np.float64) @ b.astype(np.float64)).astype(np.int32)


def quantized_linear(x_q: QuantizedMatrix, w_q: QuantizedMatrix) -> np.ndarray:
    """Integer matmul followed by per-output-column dequantization.

    Column ``j`` of the int32 accumulator is multiplied by
    ``s_x * s_w[j]``. Only per-tensor activations are accepted: with
    per-input-channel activation scales no such factorisation exists (see
    :func:`dequant_gap_demo`).
    """
    if x_q.scheme != PER_TENSOR:
        raise SchemeError(
            "quantized_linear needs per-tensor activations; per-channel activation "
            "scales cannot be folded into one output scale, see dequant_gap_demo"
        )
    if w_q.scheme != PER_OUTPUT_CHANNEL:
        raise SchemeError("quantized_linear needs weights quantized per output channel")
    if x_q.shape[1] != w_q.shape[0]:
        raise ShapeError(f"cannot multiply {x_q.shape} by {w_q.shape}")
    acc = int_matmul(x_q.qvalues, w_q.qvalues)
    out_scale = np.float64(x_q.scales[0]) * w_q.scales.astype(np.float64)
    return (acc * out_scale[None, :]).astype(DTYPE)


def smooth_scales(stats: CalibrationStats, cfg: SmoothingConfig = SmoothingConfig()) -> np.ndarray:
    a = np.maximum(stats.act_max, cfg.eps)
    w = np.maximum(stats.wt_max, cfg.eps)
    s = a**cfg.alpha / w ** (1.0 - cfg.alpha)
    return s.astype(DTYPE)


def apply_smoothing(x, w, s) -> tuple[np.ndarray, np.ndarray]:
    """Divide activation column j by ``s[j]`` and multiply weight row j by it."""
    x = as_matrix(x, "x")
    w = as_matrix(w, "w")
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if x.shape[1] != w.shape[0] or s.size != x.shape[1]:
        raise ShapeError(f"smoothing vector of length {s.size} does not fit x {x.shape} and w {w.shape}")
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise DomainError("smoothing factors must be positive and finite")
    x_hat = (x.astype(np.float64) / s[None, :]).astype(DTYPE)
    w_hat = (w.astype(np.float64) * s[:, None]).astype(DTYPE)
    return x_hat, w_hat


def quantized_matmul(x, w, s=None, eps: float = DEFAULT_EPS) -> np.ndarray:
    """W8A8 product: optional smoothing, per-tensor x, per-output-channel w."""
    if s is not None:
        x, w = apply_smoothing(x, w, s)
    return quantized_linear(quantize(x, PER_TENSOR, eps), quantize(w, PER_OUTPUT_CHANNEL, eps))


def quantization_error(x, w, s=None, eps: float = DEFAULT_EPS) -> float:
    """Relative Frobenius error of :func:`quantized_matmul` against ``x @ w``."""
    ref = np.asarray(x, dtype=np.float64) @ np.asarray(w, dtype=np.float64)
    got = quantized_matmul(x, w, s, eps).astype(np.float64)
    denom = np.linalg.norm(ref)
    return float(np.linalg.norm(got - ref) / denom) if denom > 0 else float(np.linalg.norm(got))


@dataclass(frozen=True, eq=False)
class GapReport:
    """Per-output-column residual of the best single dequantization scalar.

    ``residuals[j]`` is ``min_c || c * Y_int[:, j] - Y_ref[:, j] ||_2`` where
    ``Y_ref`` is the product of the dequantized operands. ``scalars[j]`` is
    the minimiser in output units.
    """

    residuals: np.ndarray
    scalars: np.ndarray
    reference_norms: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sqrt(np.sum(self.residuals**2)))

    @property
    def relative(self) -> float:
        ref = float(np.sqrt(np.sum(self.reference_norms**2)))
        return self.total / ref if ref > 0 else 0.0


def dequant_gap_demo(x, w, act_scales, eps: float = DEFAULT_EPS) -> GapReport:
    """Show that per-input-channel activation scales defeat output dequantization."""
    x = as_matrix(x, "x")
    w = as_matrix(w, "w")
    a = np.asarray(act_scales, dtype=DTYPE).reshape(-1)
    if a.size != x.shape[1] or x.shape[1] != w.shape[0]:
        raise ShapeError(f"act_scales of length {a.size} do not fit x {x.shape} and w {w.shape}")
    if np.any(a <= 0):
        raise DomainError("activation scales must be positive")
    x_q = quantize_with_scales(x, a, PER_INPUT_CHANNEL)
    w_q = quantize(w, PER_OUTPUT_CHANNEL, eps)
    y_int = int_matmul(x_q.qvalues, w_q.qvalues).astype(np.float64)

    # Work relative to the first channel's scale so that identical scales give
    # ratios of exactly 1.0 and a bit-exact zero residual.
    a_ref = np.float64(a[0])
    ratios = a.astype(np.float64) / a_ref
    z = (x_q.qvalues.astype(np.float64) * ratios[None, :]) @ w_q.qvalues.astype(np.float64)

    unit = a_ref * w_q.scales.astype(np.float64)
    yy = np.einsum("ij,ij->j", y_int, y_int)
    yz = np.einsum("ij,ij->j", y_int, z)
    c = np.divide(yz, yy, out=np.zeros_like(yz), where=yy > 0)
    resid = np.linalg.norm(c[None, :] * y_int - z, axis=0) * unit
    return GapReport(resid, c * unit, np.linalg.norm(z, axis=0) * unit)


def save_calibration(path, stats: list[CalibrationStats]) -> None:
    from .fileio import atomic_write_text

    doc = {
        "layers": [
            {"name": s.name, "act_max": s.act_max.tolist(), "wt_max": s.wt_max.tolist()} for s in stats
        ]
    }
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def load_calibration(path) -> list[CalibrationStats]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return [CalibrationStats(l["act_max"], l["wt_max"], l["name"]) for l in doc["layers"]]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not a calibration stats file ({exc})") from exc
