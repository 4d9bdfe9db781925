"""Constraint-filtered search over quantization settings with Pareto selection."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, EmptyInputError
from .fileio import atomic_write_text
from .model import DYNAMIC, STATIC
from .quant import SmoothingConfig

DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
WEIGHT_SCHEMES = ("per_channel", "per_tensor")


@dataclass(frozen=True, order=True)
class QuantConfig:
    weight_scheme: str = "per_channel"
    alpha: float = 0.5
    act_policy: str = STATIC

    def __post_init__(self):
        if self.weight_scheme not in WEIGHT_SCHEMES:
            raise DomainError(f"unknown weight scheme {self.weight_scheme!r}")
        if self.act_policy not in (STATIC, DYNAMIC):
            raise DomainError(f"unknown activation policy {self.act_policy!r}")
        SmoothingConfig(self.alpha)

    @property
    def key(self) -> str:
        return f"{self.weight_scheme}/alpha={self.alpha:g}/{self.act_policy}"


@dataclass(frozen=True)
class SearchSpace:
    configs: tuple[QuantConfig, ...]

    def __post_init__(self):
        if not self.configs:
            raise EmptyInputError("search space is empty")

    @classmethod
    def grid(
        cls,
        alphas: Sequence[float] = DEFAULT_ALPHAS,
        act_policies: Sequence[str] = (STATIC, DYNAMIC),
        weight_schemes: Sequence[str] = WEIGHT_SCHEMES,
    ) -> "SearchSpace":
        return cls(tuple(QuantConfig(w, a, p) for w, a, p in itertools.product(weight_schemes, alphas, act_policies)))

    def __len__(self) -> int:
        return len(self.configs)


@dataclass(frozen=True)
class TrialResult:
    config: Optional[QuantConfig]
    quality: float
    latency_ms: float

    def __post_init__(self):
        if not 0.0 <= self.quality <= 1.0:
            raise DomainError(f"quality {self.quality} outside [0, 1]")
        if not (np.isfinite(self.latency_ms) and self.latency_ms > 0):
            raise DomainError(f"latency must be finite and positive, got {self.latency_ms}")

    @property
    def key(self) -> str:
        return self.config.key if self.config is not None else "baseline"


@dataclass(frozen=True)
class Constraints:
    max_quality_degradation: float = 0.0001
    min_latency_improvement: float = 0.20

    def __post_init__(self):
        if self.max_quality_degradation < 0 or self.min_latency_improvement < 0:
            raise DomainError("constraint thresholds must be non-negative")

    def quality_ok(self, trial: TrialResult, baseline: TrialResult) -> bool:
        return trial.quality >= baseline.quality - self.max_quality_degradation

    def latency_ok(self, trial: TrialResult, baseline: TrialResult) -> bool:
        return trial.latency_ms <= baseline.latency_ms * (1.0 - self.min_latency_improvement)

    def feasible(self, trial: TrialResult, baseline: TrialResult) -> bool:
        return self.quality_ok(trial, baseline) and self.latency_ok(trial, baseline)


def dominates(a: TrialResult, b: TrialResult) -> bool:
    return a.quality >= b.quality and a.latency_ms <= b.latency_ms and (a.quality > b.quality or a.latency_ms < b.latency_ms)


def pareto_frontier(trials: Sequence[TrialResult]) -> list[TrialResult]:
    """Non-dominated trials ordered by ascending latency (then quality desc)."""
    if len(trials) == 0:
        raise DomainError("pareto_frontier needs at least one trial")
    ordered = sorted(trials, key=lambda t: (t.latency_ms, -t.quality, t.key))
    frontier: list[TrialResult] = []
    best_q = -np.inf
    best_lat = None
    # Sweep by latency: a trial survives if no faster-or-equal trial has
    # higher-or-equal quality with one of the two strict.
    for t in ordered:
        if t.quality > best_q:
            frontier.append(t)
            best_q, best_lat = t.quality, t.latency_ms
        elif t.quality == best_q and t.latency_ms == best_lat:
            frontier.append(t)  # exact duplicate of a frontier point
    return frontier


@dataclass
class SearchOutcome:
    baseline: TrialResult
    constraints: Constraints
    trials: list[TrialResult]
    feasible: list[bool]
    frontier: list[TrialResult]
    selected: Optional[TrialResult]
    nearest_miss: dict = field(default_factory=dict)

    @property
    def is_feasible(self) -> bool:
        return self.selected is not None

    def to_dict(self) -> dict:
        def trial(t: TrialResult, feasible=None) -> dict:
            d = {"config": asdict(t.config) if t.config else None, "key": t.key, "quality": t.quality, "latency_ms": t.latency_ms}
            if feasible is not None:
                d["feasible"] = feasible
            return d

        return {
            "baseline": trial(self.baseline),
            "constraints": asdict(self.constraints),
            "trials": [trial(t, f) for t, f in zip(self.trials, self.feasible)],
            "frontier": [trial(t) for t in self.frontier],
            "selected": trial(self.selected) if self.selected else None,
            "infeasible": None if self.selected else self.nearest_miss,
        }

    def save(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")


def _nearest_misses(trials, baseline, constraints) -> dict:
    report = {}
    q_fail = [t for t in trials if not constraints.quality_ok(t, baseline)]
    if q_fail:
        t = max(q_fail, key=lambda t: (t.quality, -t.latency_ms))
        need = baseline.quality - constraints.max_quality_degradation
        report["quality"] = {"key": t.key, "quality": t.quality, "required": need, "shortfall": need - t.quality}
    l_fail = [t for t in trials if not constraints.latency_ok(t, baseline)]
    if l_fail:
        t = min(l_fail, key=lambda t: (t.latency_ms, -t.quality))
        limit = baseline.latency_ms * (1.0 - constraints.min_latency_improvement)
        report["latency"] = {"key": t.key, "latency_ms": t.latency_ms, "required": limit, "excess": t.latency_ms - limit}
    return report


def run_search(
    space: SearchSpace,
    baseline: TrialResult,
    evaluator: Callable[[QuantConfig], TrialResult],
    constraints: Constraints = Constraints(),
    budget: Optional[int] = None,
    seed: int = 42,
) -> SearchOutcome:
    """Evaluate the grid (or a seeded subset of ``budget`` configs) and pick
    the highest-quality feasible trial, ties going to lower latency."""
    configs = list(space.configs)
    if budget is not None:
        if budget < 1:
            raise DomainError("budget must be >= 1")
        if budget < len(configs):
            pick = np.random.default_rng(seed).choice(len(configs), size=budget, replace=False)
            configs = [configs[i] for i in sorted(pick)]
    trials = sorted((evaluator(c) for c in configs), key=lambda t: t.key)
    feasible = [constraints.feasible(t, baseline) for t in trials]
    frontier = pareto_frontier(trials)
    candidates = [t for t, ok in zip(trials, feasible) if ok]
    selected = None
    if candidates:
        selected = min(candidates, key=lambda t: (-t.quality, t.latency_ms, t.key))
    misses = {} if selected else _nearest_misses(trials, baseline, constraints)
    return SearchOutcome(baseline, constraints, trials, feasible, frontier, selected, misses)
