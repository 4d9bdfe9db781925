"""Evaluation metrics: EDRM, MAP, Spearman, binary classification, combined loss."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats as _stats

from .errors import DomainError, EmptyInputError, FormatError, ScoringError, ShapeError, UndefinedCorrelationError
from .fileio import parse_float, read_tsv


@dataclass(frozen=True)
class EdrmRecord:
    hypothesis: float
    reference: float
    scale_min: float = 0.0
    scale_max: float = 5.0

    def __post_init__(self):
        if not self.scale_min < self.scale_max:
            raise DomainError(f"scale_min {self.scale_min} must be below scale_max {self.scale_max}")
        for label, v in (("hypothesis", self.hypothesis), ("reference", self.reference)):
            if not self.scale_min <= v <= self.scale_max:
                raise DomainError(f"{label} {v} outside [{self.scale_min}, {self.scale_max}]")

    @property
    def dmax(self) -> float:
        # farthest scale end from the reference
        return max(self.reference - self.scale_min, self.scale_max - self.reference)


def edrm(records: Sequence[EdrmRecord]) -> float:
    """Micro-averaged ``1 - |h - r| / dmax`` over all records."""
    if len(records) == 0:
        raise DomainError("edrm needs at least one record")
    total = 0.0
    for rec in records:
        d = abs(rec.hypothesis - rec.reference)
        dmax = rec.dmax
        if dmax == 0:
            total += 1.0 if d == 0 else 0.0
        else:
            total += 1.0 - d / dmax
    return total / len(records)


@dataclass(frozen=True)
class RankedQuery:
    query_id: str
    ranked: tuple[str, ...]
    relevant: frozenset[str]

    def __init__(self, query_id, ranked, relevant):
        ranked = tuple(ranked)
        if len(ranked) == 0:
            raise EmptyInputError(f"query {query_id!r} has no ranked candidates")
        if len(set(ranked)) != len(ranked):
            raise DomainError(f"query {query_id!r} ranks a candidate more than once")
        object.__setattr__(self, "query_id", str(query_id))
        object.__setattr__(self, "ranked", ranked)
        object.__setattr__(self, "relevant", frozenset(relevant))


def average_precision(query: RankedQuery) -> float:
    """Mean of precision@rank over the query's relevant items.

    Relevant items absent from the ranking contribute a precision of 0.
    """
    if not query.relevant:
        raise ScoringError(f"query {query.query_id!r} has no relevant items")
    hits = 0
    total = 0.0
    for rank, cand in enumerate(query.ranked, 1):
        if cand in query.relevant:
            hits += 1
            total += hits / rank
    return total / len(query.relevant)


def mean_average_precision(queries: Sequence[RankedQuery]) -> float:
    if len(queries) == 0:
        raise DomainError("mean_average_precision needs at least one query")
    return sum(average_precision(q) for q in queries) / len(queries)


def average_ranks(x) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


class SpearmanResult(NamedTuple):
    rho: float
    pvalue: float


def spearman_rho(x, y) -> SpearmanResult:
    """Spearman correlation with a two-sided t-approximation p-value."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != y.size:
        raise ShapeError(f"length mismatch: {x.size} vs {y.size}")
    n = x.size
    if n < 3:
        raise DomainError(f"spearman_rho needs at least 3 pairs, got {n}")
    rx, ry = average_ranks(x), average_ranks(y)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    vx, vy = float(dx @ dx), float(dy @ dy)
    if vx == 0 or vy == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    # one square root of the product keeps integer-rank cases exact
    rho = float(np.clip(float(dx @ dy) / math.sqrt(vx * vy), -1.0, 1.0))
    if abs(rho) >= 1.0:
        return SpearmanResult(rho, 0.0)
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return SpearmanResult(rho, float(2.0 * _stats.t.sf(abs(t), n - 2)))


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision_degenerate(self) -> bool:
        return self.tp + self.fp == 0

    @property
    def recall_degenerate(self) -> bool:
        return self.tp + self.fn == 0


def classification_metrics(pred, gold) -> ClassificationReport:
    p = np.asarray(pred).reshape(-1)
    g = np.asarray(gold).reshape(-1)
    if p.size != g.size:
        raise ShapeError(f"length mismatch: {p.size} predictions vs {g.size} gold labels")
    if p.size == 0:
        raise EmptyInputError("classification_metrics needs at least one label")
    if not (np.isin(p, (0, 1)).all() and np.isin(g, (0, 1)).all()):
        raise DomainError("labels must be binary (0 or 1)")
    p, g = p.astype(bool), g.astype(bool)
    tp = int(np.sum(p & g))
    fp = int(np.sum(p & ~g))
    fn = int(np.sum(~p & g))
    tn = int(np.sum(~p & ~g))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision and recall else 0.0
    return ClassificationReport((tp + tn) / p.size, precision, recall, f1, tp, fp, fn, tn)


def combined_loss(probs, gold, alpha: float = 0.5, beta: float = 0.5, floor: float = 1e-12) -> float:
    """``alpha * cross-entropy + beta * MSE`` over a batch of class distributions.

    The MSE term compares the argmax class index with the gold class index,
    treating classes as points on the similarity scale.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        probs = probs[None, :]
    gold = np.asarray(gold, dtype=np.int64).reshape(-1)
    if probs.shape[0] != gold.size:
        raise ShapeError(f"{probs.shape[0]} probability rows but {gold.size} gold labels")
    if alpha < 0 or beta < 0:
        raise DomainError("alpha and beta must be non-negative")
    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise DomainError("each probability row must be non-negative and sum to 1")
    if np.any(gold < 0) or np.any(gold >= probs.shape[1]):
        raise DomainError("gold label outside the class range")
    rows = np.arange(gold.size)
    ce = float(np.mean(-np.log(np.maximum(probs[rows, gold], floor))))
    mse = float(np.mean((np.argmax(probs, axis=1) - gold) ** 2))
    return alpha * ce + beta * mse


def _joined_values(pred_path, gold_path) -> tuple[list[str], np.ndarray, np.ndarray]:
    pred = {i: parse_float(v, f"{pred_path}") for i, v in read_tsv(pred_path, 2, "id/value")}
    gold_rows = read_tsv(gold_path, 2, "id/value")
    missing = [i for i, _ in gold_rows if i not in pred]
    if missing:
        raise FormatError(f"{pred_path}: no prediction for id(s) {missing[:5]}")
    ids = [i for i, _ in gold_rows]
    return ids, np.array([pred[i] for i in ids]), np.array([parse_float(v, f"{gold_path}") for _, v in gold_rows])


def load_edrm_records(pred_path, gold_path, scale_min: float = 0.0, scale_max: float = 5.0) -> list[EdrmRecord]:
    _, h, r = _joined_values(pred_path, gold_path)
    return [EdrmRecord(float(a), float(b), scale_min, scale_max) for a, b in zip(h, r)]


def load_value_pairs(pred_path, gold_path) -> tuple[np.ndarray, np.ndarray]:
    _, p, g = _joined_values(pred_path, gold_path)
    return p, g


def load_ranked_queries(ranks_path, relevant_path) -> list[RankedQuery]:
    """Read ``query<TAB>candidate<TAB>rank`` and ``query<TAB>relevant`` files."""
    ranked: dict[str, list[tuple[float, str]]] = {}
    for q, cand, rank in read_tsv(ranks_path, 3, "query/candidate/rank"):
        ranked.setdefault(q, []).append((parse_float(rank, str(ranks_path)), cand))
    relevant: dict[str, set[str]] = {}
    for q, rel in read_tsv(relevant_path, 2, "query/relevant"):
        relevant.setdefault(q, set()).add(rel)
    queries = []
    for q in list(ranked) + [q for q in relevant if q not in ranked]:
        cands = [c for _, c in sorted(ranked.get(q, []), key=lambda t: t[0])]
        if not cands:
            raise FormatError(f"{ranks_path}: query {q!r} has relevant items but no ranking")
        queries.append(RankedQuery(q, cands, relevant.get(q, set())))
    return queries
