"""Matplotlib figures written next to the CLI's CSV/JSON reports."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bench import BenchReport, TradeOff  # noqa: E402
from .search import SearchOutcome  # noqa: E402

OUTLIER_BAND = (2.5, 5.0)


def figure_path(report_path, suffix: str = "") -> Path:
    """``report.csv`` -> ``report.png`` (or ``report<suffix>.png``)."""
    p = Path(report_path)
    return p.with_name(p.stem + suffix + ".png")


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp.png")
    fig.savefig(tmp, dpi=120, bbox_inches="tight")
    plt.close(fig)
    tmp.replace(path)
    return path


def plot_activation_magnitudes(
    magnitudes: np.ndarray, path, title: str = "", threshold: float = OUTLIER_BAND[0], quantized: Optional[np.ndarray] = None
) -> Path:
    """Token x channel |activation| map plus per-channel maxima.

    ``magnitudes`` is ``(tokens, channels)``. When ``quantized`` is given the
    per-channel maxima of both tensors are overlaid.
    """
    mags = np.abs(np.asarray(magnitudes, dtype=np.float64))
    fig, (ax_map, ax_max) = plt.subplots(2, 1, figsize=(8, 6), gridspec_kw={"height_ratios": [3, 1]}, sharex=True)
    im = ax_map.imshow(mags, aspect="auto", interpolation="nearest", cmap="viridis")
    fig.colorbar(im, ax=[ax_map, ax_max], label="|activation|")
    ax_map.set_ylabel("token")
    if title:
        ax_map.set_title(title)
    ch = np.arange(mags.shape[1])
    ax_max.bar(ch, mags.max(axis=0), color="C0", label="original")
    if quantized is not None:
        ax_max.plot(ch, np.abs(quantized).max(axis=0), "C3.", label="quantized")
        ax_max.legend(loc="upper right", fontsize=7)
    ax_max.axhline(threshold, color="k", lw=0.8, ls="--")
    ax_max.set_xlabel("channel")
    ax_max.set_ylabel("max")
    return _save(fig, path)


def plot_pareto(outcome: SearchOutcome, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    lat = [t.latency_ms for t in outcome.trials]
    q = [t.quality for t in outcome.trials]
    colors = ["C2" if f else "C7" for f in outcome.feasible]
    ax.scatter(lat, q, c=colors, s=24, zorder=2)
    front = outcome.frontier
    ax.plot([t.latency_ms for t in front], [t.quality for t in front], "C0-", lw=1, zorder=1, label="Pareto frontier")
    b = outcome.baseline
    ax.scatter([b.latency_ms], [b.quality], marker="*", s=120, c="k", label="baseline", zorder=3)
    c = outcome.constraints
    ax.axvline(b.latency_ms * (1 - c.min_latency_improvement), color="C1", ls="--", lw=0.8, label="latency gate")
    ax.axhline(b.quality - c.max_quality_degradation, color="C3", ls="--", lw=0.8, label="quality gate")
    if outcome.selected is not None:
        s = outcome.selected
        ax.scatter([s.latency_ms], [s.quality], facecolors="none", edgecolors="C3", s=160, lw=1.5, label="selected")
    ax.set_xlabel("latency (ms)")
    ax.set_ylabel("agreement with FP")
    ax.legend(fontsize=7, loc="lower right")
    return _save(fig, path)


def plot_tradeoff(baseline: BenchReport, optimized: BenchReport, tradeoff: TradeOff, path) -> Path:
    labels = ["latency avg (ms)", "size (MB)", "energy (kWh)", "CO2 (kg)"]
    base = [baseline.latency.avg_ms, baseline.size_mb, baseline.energy_kwh, baseline.co2_kg]
    opt = [optimized.latency.avg_ms, optimized.size_mb, optimized.energy_kwh, optimized.co2_kg]
    fig, axes = plt.subplots(1, len(labels), figsize=(10, 3))
    for ax, lab, a, b in zip(axes, labels, base, opt):
        ax.bar([0, 1], [a, b], color=["C7", "C2"])
        ax.set_xticks([0, 1], [baseline.label, optimized.label], rotation=20, fontsize=7)
        ax.set_title(lab, fontsize=8)
    fig.suptitle(
        f"speed-up {tradeoff.speedup:.2f}x, size -{100 * tradeoff.size_reduction:.1f}%, "
        f"energy -{100 * tradeoff.energy_reduction:.1f}%",
        fontsize=9,
    )
    return _save(fig, path)


def plot_score_histogram(scores: Sequence[float], path, rescaled: Optional[Sequence[float]] = None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.hist(scores, bins=30, alpha=0.6, label="cosine")
    if rescaled is not None:
        ax.hist(rescaled, bins=30, alpha=0.6, label="min-max rescaled")
    ax.set_xlabel("score")
    ax.set_ylabel("mappings")
    ax.legend(fontsize=7)
    return _save(fig, path)
