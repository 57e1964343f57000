"""Train/validation/test partitioning by timestamp interval or by ratio."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..scene import Sample, Source

log = logging.getLogger(__name__)

Interval = tuple[float, float]


@dataclass(frozen=True)
class SplitSpec:
    """Half-open [lo, hi) timestamp ranges for the three splits."""

    train_interval: Interval
    val_interval: Interval
    test_interval: Interval

    def __post_init__(self):
        ivs = [self.train_interval, self.val_interval, self.test_interval]
        for lo, hi in ivs:
            if not lo < hi:
                raise ValueError(f"empty interval [{lo}, {hi})")
        for i in range(3):
            for j in range(i + 1, 3):
                (a, b), (c, d) = ivs[i], ivs[j]
                if a < d and c < b:
                    raise ValueError(f"intervals overlap: {ivs[i]} and {ivs[j]}")

    @classmethod
    def for_stage(cls, t_k: float, window: float = 10.0) -> "SplitSpec":
        """Train up to t_k - window, validate on the next window, test on [t_k, t_k + window)."""
        return cls((0.0, t_k - window), (t_k - window, t_k), (t_k, t_k + window))


# the three drift stages used throughout
STAGE_TIMES = (90.0, 190.0, 290.0)
STAGE_SPLITS = tuple(SplitSpec.for_stage(t) for t in STAGE_TIMES)


class EmptySplitError(ValueError):
    pass


def _check(parts, n_in):
    sizes = [len(p) for p in parts]
    if min(sizes) == 0:
        raise EmptySplitError(f"empty split: train/val/test = {sizes[0]}/{sizes[1]}/{sizes[2]} of {n_in}")


def split_by_time(dataset: Sequence[Sample], spec: SplitSpec):
    """Assign samples to splits by interval membership.

    Samples outside every interval are left out; the count is logged.
    """
    parts = ([], [], [])
    ivs = (spec.train_interval, spec.val_interval, spec.test_interval)
    skipped = 0
    for s in dataset:
        for part, (lo, hi) in zip(parts, ivs):
            if lo <= s.timestamp < hi:
                part.append(s)
                break
        else:
            skipped += 1
    if skipped:
        log.info("split: %d samples outside all intervals", skipped)
    _check(parts, len(dataset))
    return parts


def split_by_ratio(dataset: Sequence[Sample], ratios=(0.7, 0.2, 0.1), seed: int = 0):
    """Seeded shuffle, then contiguous 70/20/10 (by default) slices."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be three non-negative numbers summing to 1")
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    cuts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    parts = tuple([dataset[i] for i in idx] for idx in cuts)
    _check(parts, n)
    return parts


def split(dataset: Sequence[Sample], spec: SplitSpec | None = None, *, ratios=(0.7, 0.2, 0.1), seed: int = 0):
    """Timestamp mode when ``spec`` is given, ratio mode otherwise."""
    if spec is not None:
        return split_by_time(dataset, spec)
    return split_by_ratio(dataset, ratios, seed)


def composite(grid: Sequence[Sample], vehicular: Sequence[Sample], t_k: float, window: float = 10.0) -> list[Sample]:
    """Grid samples plus every vehicular sample stamped at or before t_k + window."""
    if any(s.source is not Source.GRID for s in grid):
        raise ValueError("grid part contains non-grid samples")
    return list(grid) + [s for s in vehicular if s.timestamp <= t_k + window]
