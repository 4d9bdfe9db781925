"""Quantized embedding alignment: W8A8 quantization with scale smoothing,
mean-pooled text encoding, cosine alignment, evaluation metrics and
configuration search."""

__version__ = "0.1.0"
