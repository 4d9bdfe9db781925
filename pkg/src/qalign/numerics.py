"""Dense array helpers shared by the rest of the package.

Matrices are plain ``numpy.ndarray`` objects of dtype float32 in row-major
(C) order; 3-D tensors are indexed ``(batch, seq, dim)``. Reductions are
accumulated in float64 and narrowed to float32 at the end.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import EmptyInputError, ShapeError

DTYPE = np.float32


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate and coerce ``values`` into a finite 2-D float32 array."""
    arr = np.ascontiguousarray(values, dtype=DTYPE)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_tensor3(values, name: str = "tensor") -> np.ndarray:
    """Validate and coerce ``values`` into a finite (B, L, D) float32 array."""
    arr = np.ascontiguousarray(values, dtype=DTYPE)
    if arr.ndim != 3:
        raise ShapeError(f"{name} must be 3-D (batch, seq, dim), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return (a.astype(np.float64) @ b.astype(np.float64)).astype(DTYPE)


def mean_over_sequence(h, lengths: Sequence[int] | None = None) -> np.ndarray:
    """Average hidden states over the sequence axis.

    Args:
        h: Tensor of shape ``(B, L, H)``.
        lengths: Optional per-row true token counts. When given, only the
            first ``lengths[b]`` positions of row ``b`` are averaged (masked
            mean); rows with length 0 pool to zeros. By default every one of
            the ``L`` positions, padding included, enters the average.

    Returns:
        ``(B, H)`` float32 matrix.
    """
    h = as_tensor3(h, "h")
    batch, seq, _ = h.shape
    if seq == 0:
        raise EmptyInputError("cannot pool over an empty sequence (L = 0)")
    h64 = h.astype(np.float64)
    if lengths is None:
        return (h64.sum(axis=1) / seq).astype(DTYPE)
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.shape != (batch,):
        raise ShapeError(f"lengths must have shape ({batch},), got {lengths.shape}")
    mask = np.arange(seq)[None, :] < lengths[:, None]
    sums = (h64 * mask[:, :, None]).sum(axis=1)
    denom = np.maximum(lengths, 1)[:, None]
    return (sums / denom).astype(DTYPE)


def concat_rows(parts: Sequence[np.ndarray]) -> np.ndarray:
    if len(parts) == 0:
        raise EmptyInputError("concat_rows needs at least one part")
    mats = [as_matrix(p, f"parts[{i}]") for i, p in enumerate(parts)]
    cols = {m.shape[1] for m in mats}
    if len(cols) != 1:
        raise ShapeError(f"column counts differ across parts: {[m.shape for m in mats]}")
    return np.concatenate(mats, axis=0)
