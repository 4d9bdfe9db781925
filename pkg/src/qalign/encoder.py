"""Text normalization, hashed tokenization, batching and corpus encoding."""

from __future__ import annotations

import hashlib
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import DomainError, EmptyInputError, FormatError, ShapeError
from .fileio import read_tsv
from .model import EncoderModel
from .numerics import as_matrix, concat_rows, mean_over_sequence
from .quant import CalibrationStats

_NON_ALNUM = re.compile(r"[^\w\s]|_")
_SPACES = re.compile(r"\s+")


def normalize_text(raw: str) -> str:
    """Lowercase, replace anything but letters/digits/whitespace by a space,
    collapse whitespace runs and trim."""
    text = _NON_ALNUM.sub(" ", raw.lower())
    return _SPACES.sub(" ", text).strip()


@dataclass(frozen=True)
class TokenizerConfig:
    max_length: int = 512
    vocab_size: int = 4096
    pad_id: int = 0
    seed: int = 42

    def __post_init__(self):
        if self.max_length < 1:
            raise DomainError("max_length must be >= 1")
        if self.vocab_size < 2:
            raise DomainError("vocab_size must be >= 2")
        if self.pad_id != 0:
            raise DomainError("pad_id is fixed at 0")


@dataclass(frozen=True, eq=False)
class TokenBatch:
    ids: np.ndarray  # (B, L) int64
    true_lengths: np.ndarray  # (B,)

    def __len__(self) -> int:
        return self.ids.shape[0]


@lru_cache(maxsize=1 << 16)
def _token_id(token: str, vocab_size: int, seed: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little", signed=True)).digest()
    return int.from_bytes(digest, "little") % (vocab_size - 1) + 1


def tokenize_batch(texts: Sequence[str], cfg: TokenizerConfig) -> TokenBatch:
    if len(texts) == 0:
        raise EmptyInputError("tokenize_batch needs at least one text")
    ids = np.full((len(texts), cfg.max_length), cfg.pad_id, dtype=np.int64)
    lengths = np.zeros(len(texts), dtype=np.int64)
    for row, text in enumerate(texts):
        toks = text.split()[: cfg.max_length]
        lengths[row] = len(toks)
        for col, tok in enumerate(toks):
            ids[row, col] = _token_id(tok, cfg.vocab_size, cfg.seed)
    return TokenBatch(ids, lengths)


@dataclass(frozen=True)
class Corpus:
    records: tuple[tuple[str, str], ...]

    def __init__(self, records):
        records = tuple((str(i), str(t)) for i, t in records)
        ids = [r[0] for r in records]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValueError(f"duplicate corpus id {dup!r}")
        object.__setattr__(self, "records", records)

    @classmethod
    def from_texts(cls, texts: Sequence[str]) -> "Corpus":
        return cls((str(i), t) for i, t in enumerate(texts))

    @classmethod
    def read(cls, path) -> "Corpus":
        """Load a headerless ``id<TAB>text`` TSV."""
        rows = read_tsv(path, 2, "corpus")
        try:
            return cls(rows)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None

    @property
    def ids(self) -> list[str]:
        return [r[0] for r in self.records]

    @property
    def texts(self) -> list[str]:
        return [r[1] for r in self.records]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def split_batches(items: Sequence, batch_size: int) -> list:
    """Cut ``items`` into ``ceil(N / batch_size)`` consecutive batches."""
    if batch_size < 1:
        raise DomainError(f"batch size must be >= 1, got {batch_size}")
    items = list(items)
    k = math.ceil(len(items) / batch_size)
    return [items[i * batch_size : min((i + 1) * batch_size, len(items))] for i in range(k)]


def encode_batch(model: EncoderModel, batch: TokenBatch, capture: Optional[dict] = None) -> np.ndarray:
    out = model.forward(batch.ids, capture)
    if out.shape != (*batch.ids.shape, model.dim):
        raise ShapeError(f"encoder produced {out.shape}, expected {(*batch.ids.shape, model.dim)}")
    return out


def default_workers() -> int:
    """Worker cap from ``QALIGN_THREADS``; unset or 0 means one per CPU."""
    raw = os.environ.get("QALIGN_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"QALIGN_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise DomainError("QALIGN_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _texts_of(corpus) -> list[str]:
    return corpus.texts if isinstance(corpus, Corpus) else list(corpus)


def encode_corpus(
    model: EncoderModel,
    corpus,
    cfg: TokenizerConfig,
    batch_size: int = 10,
    *,
    normalize: bool = True,
    masked: bool = False,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Encode every text into one pooled row, in corpus order.

    Args:
        model: FP or quantized encoder.
        corpus: A :class:`Corpus` or plain sequence of strings.
        cfg: Tokenizer settings; ``cfg.vocab_size`` must not exceed the model's.
        batch_size: Texts per batch.
        normalize: Apply :func:`normalize_text` before tokenizing.
        masked: Pool only over real tokens instead of all ``L`` positions.
        workers: Thread count for encoding batches; defaults to
            :func:`default_workers`.

    Returns:
        ``(N, H)`` float32 embedding matrix.
    """
    texts = _texts_of(corpus)
    if not texts:
        raise EmptyInputError("cannot encode an empty corpus")
    if cfg.vocab_size > model.vocab_size:
        raise DomainError(f"tokenizer vocabulary {cfg.vocab_size} exceeds model vocabulary {model.vocab_size}")
    if normalize:
        texts = [normalize_text(t) for t in texts]
    batches = split_batches(texts, batch_size)

    def run(chunk: list[str]) -> np.ndarray:
        tb = tokenize_batch(chunk, cfg)
        return mean_over_sequence(encode_batch(model, tb), tb.true_lengths if masked else None)

    n_workers = min(workers or default_workers(), len(batches))
    if n_workers <= 1:
        pooled = [run(b) for b in batches]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            pooled = list(pool.map(run, batches))
    return concat_rows(pooled)


def iter_layer_inputs(
    model: EncoderModel, corpus, cfg: TokenizerConfig, batch_size: int = 10, normalize: bool = True
) -> Iterator[tuple[TokenBatch, dict]]:
    """Yield each batch with the captured per-layer inputs ``(B, L, D)``."""
    texts = _texts_of(corpus)
    if normalize:
        texts = [normalize_text(t) for t in texts]
    for chunk in split_batches(texts, batch_size):
        tb = tokenize_batch(chunk, cfg)
        capture: dict = {}
        encode_batch(model, tb, capture)
        yield tb, capture


def collect_calibration(
    model: EncoderModel, corpus, cfg: TokenizerConfig, batch_size: int = 10, normalize: bool = True
) -> list[CalibrationStats]:
    """Per-layer max |activation| per input channel over a calibration corpus."""
    if model.quantized:
        raise ValueError("calibrate the floating-point model, not a quantized one")
    act = {model.layer_name(i): np.zeros(model.dim) for i in range(len(model.layers))}
    for _, capture in iter_layer_inputs(model, corpus, cfg, batch_size, normalize):
        for name, h in capture.items():
            act[name] = np.maximum(act[name], np.abs(h).reshape(-1, model.dim).max(axis=0))
    return [
        CalibrationStats(act[model.layer_name(i)], np.abs(as_matrix(layer.weight)).max(axis=1), model.layer_name(i))
        for i, layer in enumerate(model.layers)
    ]
