"""Age of Information: freshness weights, age-violation pruning and AoI-aware losses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .scene import Sample

PROB_EPS = 1e-7


@dataclass(frozen=True)
class AoiConfig:
    gamma: float
    threshold: float = 0.005

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not 0.0 <= self.threshold < 1.0:
            raise ValueError("threshold must be in [0, 1)")

    @property
    def max_age(self) -> float:
        """Age beyond which a sample is pruned (weight <= threshold)."""
        return math.inf if self.threshold == 0 else math.log(1.0 / self.threshold) / self.gamma


def age(t_now: float, u: float) -> float:
    if t_now < u:
        raise ValueError(f"sample stamped in the future: u={u} > t={t_now}")
    return t_now - u


def decay_weight(delta, gamma: float):
    """exp(-gamma * delta); works on scalars and arrays."""
    w = np.exp(-gamma * np.asarray(delta, dtype=float))
    return float(w) if np.ndim(w) == 0 else w


class PruneResult(NamedTuple):
    samples: list[Sample]
    retained: int
    dropped: int


def prune(dataset: Sequence[Sample], t_now: float, cfg: AoiConfig) -> PruneResult:
    """Keep the samples whose decay factor is strictly above the threshold, order preserved."""
    kept = [s for s in dataset if decay_weight(age(t_now, s.timestamp), cfg.gamma) > cfg.threshold]
    return PruneResult(kept, len(kept), len(dataset) - len(kept))


@dataclass(frozen=True)
class WeightedBatch:
    predictions: np.ndarray
    labels: np.ndarray
    ages: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.predictions, dtype=float))
        y = np.atleast_1d(np.asarray(self.labels, dtype=float))
        a = np.atleast_1d(np.asarray(self.ages, dtype=float)) if self.ages is not None else np.zeros_like(p)
        if not (p.shape == y.shape == a.shape):
            raise ValueError("predictions, labels and ages must have equal lengths")
        if np.any(a < 0):
            raise ValueError("ages must be >= 0")
        object.__setattr__(self, "predictions", p)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "ages", a)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(-self.gamma * self.ages)


def per_sample_bce(p_hat, y) -> np.ndarray:
    p = np.clip(np.asarray(p_hat, dtype=float), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(y, dtype=float)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def _reduce(values: np.ndarray, reduction: str) -> float:
    if reduction == "sum":
        return float(np.sum(values))
    if reduction == "mean":
        return float(np.mean(values)) if values.size else 0.0
    raise ValueError(f"unknown reduction {reduction!r}")


def bce_loss(batch: WeightedBatch, reduction: str = "sum") -> float:
    """Binary cross-entropy, summed over the batch unless ``reduction='mean'``."""
    return _reduce(per_sample_bce(batch.predictions, batch.labels), reduction)


def aoi_loss(batch: WeightedBatch, reduction: str = "sum") -> float:
    """Binary cross-entropy with each term scaled by its freshness weight exp(-gamma * age)."""
    return _reduce(per_sample_bce(batch.predictions, batch.labels) * batch.weights, reduction)


@dataclass(frozen=True)
class TwoPopulationConfig:
    alpha: float = 1.0
    beta: float = 0.0
    gamma_alpha: float = 0.1
    gamma_beta: float = 0.1
    boundary: float = 0.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("alpha, beta must be >= 0 with a positive sum")


def split_populations(dataset: Sequence[Sample], boundary: float) -> tuple[list[Sample], list[Sample]]:
    """Recent samples (timestamp >= boundary) and old ones."""
    recent = [s for s in dataset if s.timestamp >= boundary]
    old = [s for s in dataset if s.timestamp < boundary]
    return recent, old


def two_population_loss(batch_recent: WeightedBatch, batch_old: WeightedBatch | None,
                        cfg: TwoPopulationConfig, reduction: str = "sum") -> float:
    """alpha * L'(recent; gamma_alpha) + beta * L'(old; gamma_beta)."""
    recent = WeightedBatch(batch_recent.predictions, batch_recent.labels, batch_recent.ages, cfg.gamma_alpha)
    total = cfg.alpha * aoi_loss(recent, reduction)
    if batch_old is not None and batch_old.predictions.size:
        old = WeightedBatch(batch_old.predictions, batch_old.labels, batch_old.ages, cfg.gamma_beta)
        total = total + cfg.beta * aoi_loss(old, reduction)
    return total
