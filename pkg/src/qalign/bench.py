"""Latency measurement, size accounting and before/after trade-off reports."""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import DomainError, FormatError, WorkloadError
from .fileio import atomic_write_text

CO2_KG_PER_KWH = 0.475
REPORT_FIELDS = ("label", "latency_avg_ms", "latency_max_ms", "latency_min_ms", "size_mb", "energy_kwh", "co2_kg")


@dataclass(frozen=True)
class LatencyStats:
    avg_ms: float
    max_ms: float
    min_ms: float
    repetitions: int = 1
    warmup: int = 0
    cv: float = 0.0  # coefficient of variation of the timed runs

    def __post_init__(self):
        if self.repetitions < 1:
            raise DomainError("repetitions must be >= 1")
        # tolerate rounding when avg/min/max come from a file
        if not self.min_ms - 1e-9 <= self.avg_ms <= self.max_ms + 1e-9:
            raise DomainError(f"latency stats out of order: min {self.min_ms}, avg {self.avg_ms}, max {self.max_ms}")


def measure_latency(workload: Callable[[], object], repetitions: int = 30, warmup: int = 3) -> LatencyStats:
    if repetitions < 1:
        raise DomainError("repetitions must be >= 1")
    if warmup < 0:
        raise DomainError("warmup must be >= 0")
    for i in range(warmup):
        try:
            workload()
        except Exception as exc:
            raise WorkloadError(i, exc) from exc
    samples = []
    for i in range(repetitions):
        t0 = time.perf_counter()
        try:
            workload()
        except Exception as exc:
            raise WorkloadError(warmup + i, exc) from exc
        samples.append((time.perf_counter() - t0) * 1e3)
    avg = statistics.fmean(samples)
    cv = statistics.pstdev(samples) / avg if avg > 0 else 0.0
    return LatencyStats(min(max(avg, min(samples)), max(samples)), max(samples), min(samples), repetitions, warmup, cv)


def estimate_emissions(energy_kwh: float) -> float:
    if energy_kwh < 0:
        raise DomainError(f"energy must be non-negative, got {energy_kwh}")
    return energy_kwh * CO2_KG_PER_KWH


@dataclass(frozen=True)
class BenchReport:
    label: str
    latency: LatencyStats
    size_mb: float
    energy_kwh: float = 0.0

    @property
    def co2_kg(self) -> float:
        return estimate_emissions(self.energy_kwh)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "latency_avg_ms": round(self.latency.avg_ms, 4),
            "latency_max_ms": round(self.latency.max_ms, 4),
            "latency_min_ms": round(self.latency.min_ms, 4),
            "size_mb": round(self.size_mb, 4),
            "energy_kwh": round(self.energy_kwh, 4),
            "co2_kg": round(self.co2_kg, 4),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchReport":
        try:
            lat = LatencyStats(float(doc["latency_avg_ms"]), float(doc["latency_max_ms"]), float(doc["latency_min_ms"]))
            return cls(str(doc["label"]), lat, float(doc["size_mb"]), float(doc["energy_kwh"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"not a bench report: {exc}") from exc

    def save(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "BenchReport":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)


def size_mb(n_bytes: int) -> float:
    return n_bytes / 1e6


@dataclass(frozen=True)
class TradeOff:
    speedup: float
    size_reduction: float
    energy_reduction: float


def compare_reports(baseline: BenchReport, optimized: BenchReport) -> TradeOff:
    if optimized.latency.avg_ms <= 0:
        raise DomainError("optimized latency must be positive")
    if baseline.size_mb <= 0:
        raise DomainError("baseline size must be positive")
    energy = 1.0 - optimized.energy_kwh / baseline.energy_kwh if baseline.energy_kwh > 0 else 0.0
    return TradeOff(
        baseline.latency.avg_ms / optimized.latency.avg_ms,
        1.0 - optimized.size_mb / baseline.size_mb,
        energy,
    )
