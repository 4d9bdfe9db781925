"""End-to-end glue: encode two corpora, align them, and score quantized
configurations against the floating-point pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .align import Mapping, agreement, align_embeddings
from .bench import measure_latency
from .encoder import Corpus, TokenizerConfig, collect_calibration, encode_corpus
from .model import EncoderModel, quantize_model
from .quant import CalibrationStats, SmoothingConfig
from .search import QuantConfig, TrialResult


def align_corpora(
    model: EncoderModel,
    left: Corpus,
    right: Corpus,
    cfg: TokenizerConfig,
    batch_size: int = 10,
    rescale: bool = True,
    workers: Optional[int] = None,
) -> list[Mapping]:
    e_left = encode_corpus(model, left, cfg, batch_size, workers=workers)
    e_right = encode_corpus(model, right, cfg, batch_size, workers=workers)
    return align_embeddings(e_left, e_right, rescale)


def build_quantized(model: EncoderModel, config: QuantConfig, stats: list[CalibrationStats]) -> EncoderModel:
    return quantize_model(
        model,
        SmoothingConfig(config.alpha),
        stats,
        act_policy=config.act_policy,
        per_tensor_weights=config.weight_scheme == "per_tensor",
    )


@dataclass
class PipelineEvaluator:
    """Scores a :class:`QuantConfig` by argmax agreement with the FP pipeline
    on ``(left, right)`` and by the wall-clock latency of aligning them."""

    model: EncoderModel
    left: Corpus
    right: Corpus
    cfg: TokenizerConfig
    calibration: Corpus
    batch_size: int = 10
    repetitions: int = 3
    warmup: int = 1
    workers: Optional[int] = 1
    _reference: list[Mapping] = field(init=False, repr=False)
    _stats: list[CalibrationStats] = field(init=False, repr=False)

    def __post_init__(self):
        self._reference = self._align(self.model)
        self._stats = collect_calibration(self.model, self.calibration, self.cfg, self.batch_size)

    def _align(self, model: EncoderModel) -> list[Mapping]:
        return align_corpora(model, self.left, self.right, self.cfg, self.batch_size, workers=self.workers)

    def _latency(self, model: EncoderModel) -> float:
        return measure_latency(lambda: self._align(model), self.repetitions, self.warmup).avg_ms

    def baseline(self) -> TrialResult:
        return TrialResult(None, 1.0, self._latency(self.model))

    def __call__(self, config: QuantConfig) -> TrialResult:
        q = build_quantized(self.model, config, self._stats)
        quality = agreement(self._reference, self._align(q))
        return TrialResult(config, quality, self._latency(q))
