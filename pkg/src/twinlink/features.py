"""Multipath statistics used as input by the statistical classifiers."""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .scene import PathRecord, Sample

FEATURE_NAMES = ("p_rss", "p_max", "tau_rms", "rise_time", "theta_spread", "phi_spread")


@dataclass(frozen=True)
class FeatureVector:
    p_rss: float
    p_max: float
    tau_rms: float
    rise_time: float
    theta_spread: float
    phi_spread: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


def extract_features(paths: Sequence[PathRecord], angle_mode: str = "weighted_mean") -> FeatureVector:
    """Power and delay statistics of a path list, plus its two angle features.

    ``angle_mode="weighted_mean"`` returns the power-weighted mean azimuth and
    elevation; ``"rms"`` returns the power-weighted RMS deviation around that
    mean instead.
    """
    if not paths:
        raise ValueError("feature extraction needs at least one path")
    power = np.array([abs(p.gain) ** 2 for p in paths])
    p_rss = float(power.sum())
    if p_rss == 0.0:
        raise ValueError("all path gains are zero")
    eta = power / p_rss
    tau = np.array([p.delay for p in paths])
    theta = np.array([p.azimuth for p in paths])
    phi = np.array([p.elevation for p in paths])
    tau_mean = float(eta @ tau)
    # equal delays give exactly zero spread, free of rounding in tau_mean
    tau_rms = 0.0 if tau.min() == tau.max() else math.sqrt(max(float(eta @ (tau - tau_mean) ** 2), 0.0))
    theta_mean = float(eta @ theta)
    phi_mean = float(eta @ phi)
    if angle_mode == "weighted_mean":
        theta_f, phi_f = theta_mean, phi_mean
    elif angle_mode == "rms":
        theta_f = math.sqrt(max(float(eta @ (theta - theta_mean) ** 2), 0.0))
        phi_f = math.sqrt(max(float(eta @ (phi - phi_mean) ** 2), 0.0))
    else:
        raise ValueError(f"unknown angle_mode {angle_mode!r}")
    return FeatureVector(
        p_rss=p_rss,
        p_max=float(power.max()),
        tau_rms=tau_rms,
        rise_time=float(tau.max() - tau.min()),
        theta_spread=theta_f,
        phi_spread=phi_f,
    )


@dataclass(frozen=True)
class Perturbation:
    """Emulated parameter-estimation error applied to ground-truth paths."""

    sigma_delay: float = 1e-9
    sigma_angle: float = math.radians(1.0)
    gain_db: float = 0.5


def perturb_paths(paths: Sequence[PathRecord], rng: np.random.Generator,
                  cfg: Perturbation = Perturbation()) -> list[PathRecord]:
    """Gaussian delay/angle jitter and a uniform +-gain_db amplitude error per path."""
    out = []
    for p in paths:
        scale = 10.0 ** (rng.uniform(-cfg.gain_db, cfg.gain_db) / 20.0)
        out.append(replace(
            p,
            gain=p.gain * scale,
            delay=max(p.delay + rng.normal(0.0, cfg.sigma_delay), 0.0),
            azimuth=p.azimuth + rng.normal(0.0, cfg.sigma_angle),
            elevation=float(np.clip(p.elevation + rng.normal(0.0, cfg.sigma_angle), -math.pi / 2, math.pi / 2)),
        ))
    return out


def feature_matrix(samples: Iterable[Sample], angle_mode: str = "weighted_mean") -> tuple[np.ndarray, np.ndarray]:
    rows, labels = [], []
    for s in samples:
        rows.append(extract_features(s.paths, angle_mode).as_array())
        labels.append(s.label)
    return np.array(rows).reshape(-1, len(FEATURE_NAMES)), np.array(labels, dtype=int)


def write_features_csv(path, samples: Sequence[Sample], vectors: Sequence[FeatureVector]) -> None:
    header = ["id", "t", "y", *[f.name for f in fields(FeatureVector)]]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for s, v in zip(samples, vectors):
            w.writerow([s.id, repr(s.timestamp), s.label, *map(repr, astuple(v))])
