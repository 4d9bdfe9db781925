"""Cosine-similarity alignment between two embedding sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyInputError, ShapeError
from .fileio import atomic_write_text
from .numerics import as_matrix

NORM_FLOOR = 1e-12


class Cosine(float):
    """A cosine value that remembers whether an input vector had ~zero norm."""

    degenerate: bool

    def __new__(cls, value: float, degenerate: bool = False):
        obj = super().__new__(cls, value)
        obj.degenerate = degenerate
        return obj


def cosine(a, b) -> Cosine:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size != b.size or a.size == 0:
        raise ShapeError(f"cosine needs equal non-empty lengths, got {a.size} and {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < NORM_FLOOR or nb < NORM_FLOOR:
        return Cosine(0.0, True)
    return Cosine(float(np.clip(a @ b / (na * nb), -1.0, 1.0)))


def _unit_rows(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e = e.astype(np.float64)
    norms = np.linalg.norm(e, axis=1)
    degenerate = norms < NORM_FLOOR
    safe = np.where(degenerate, 1.0, norms)
    unit = e / safe[:, None]
    unit[degenerate] = 0.0
    return unit, degenerate


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    values: np.ndarray  # (n_left, n_right) float64 in [-1, 1]
    left_degenerate: np.ndarray
    right_degenerate: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.clip(np.asarray(self.values, dtype=np.float64), -1.0, 1.0))

    @property
    def n_left(self) -> int:
        return self.values.shape[0]

    @property
    def n_right(self) -> int:
        return self.values.shape[1]

    def transpose(self) -> "SimilarityMatrix":
        return SimilarityMatrix(self.values.T.copy(), self.right_degenerate, self.left_degenerate)


def similarity_matrix(e_left, e_right) -> SimilarityMatrix:
    e_left = as_matrix(e_left, "e_left")
    e_right = as_matrix(e_right, "e_right")
    if e_left.shape[1] != e_right.shape[1]:
        raise ShapeError(f"embedding widths differ: {e_left.shape[1]} vs {e_right.shape[1]}")
    ul, dl = _unit_rows(e_left)
    ur, dr = _unit_rows(e_right)
    return SimilarityMatrix(ul @ ur.T, dl, dr)


def min_max_rescale(scores) -> np.ndarray:
    """Map scores affinely onto [0, 1]; a constant vector maps to all zeros."""
    x = np.asarray(scores, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise EmptyInputError("min_max_rescale needs at least one score")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


@dataclass(frozen=True)
class Mapping:
    left_index: int
    right_index: int
    score: float
    probability: float


def best_matches(s: SimilarityMatrix, rescale: bool = True) -> list[Mapping]:
    """Pick the highest-similarity right item for each left row.

    Ties go to the lowest right index. With ``rescale`` and at least two rows
    the probability is the min-max rescaled best score across rows; otherwise
    it is ``(score + 1) / 2``.
    """
    if s.n_right == 0:
        raise EmptyInputError("no right-hand items to match against")
    if s.n_left == 0:
        return []
    j = np.argmax(s.values, axis=1)  # first maximum wins
    best = s.values[np.arange(s.n_left), j]
    if rescale and s.n_left >= 2:
        prob = min_max_rescale(best)
    else:
        prob = np.clip((best + 1.0) / 2.0, 0.0, 1.0)
    return [Mapping(i, int(j[i]), float(best[i]), float(prob[i])) for i in range(s.n_left)]


def format_mappings(mappings: Sequence[Mapping], left_ids: Sequence[str], right_ids: Sequence[str]) -> str:
    lines = [
        f"{left_ids[m.left_index]}\t{right_ids[m.right_index]}\t{m.score:.6f}\t{m.probability:.6f}\n" for m in mappings
    ]
    return "".join(lines)


def write_mappings(path, mappings, left_ids, right_ids) -> None:
    atomic_write_text(path, format_mappings(mappings, left_ids, right_ids))


def align_embeddings(e_left, e_right, rescale: bool = True) -> list[Mapping]:
    return best_matches(similarity_matrix(e_left, e_right), rescale)


def agreement(a: Sequence[Mapping], b: Sequence[Mapping], mask: Optional[np.ndarray] = None) -> float:
    """Fraction of left rows whose chosen right index is the same in both runs."""
    if len(a) != len(b):
        raise ShapeError(f"mapping lists differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise EmptyInputError("no mappings to compare")
    same = np.array([x.right_index == y.right_index for x, y in zip(a, b)])
    if mask is not None:
        same = same[mask]
    return float(same.mean())
