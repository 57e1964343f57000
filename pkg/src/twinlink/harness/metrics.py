"""Accuracy, confusion counts, ROC/AUC and logit histograms."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

# fixed edges so histograms from different runs line up bin for bin
LOGIT_EDGES = tuple(float(v) for v in np.linspace(-20.0, 20.0, 41))


def roc_auc(scores, labels):
    """ROC points (fpr, tpr, threshold) swept over unique scores, plus trapezoid AUC.

    Higher scores mean label 1. Equal scores are grouped so ties contribute
    half a pair, matching the Mann-Whitney statistic.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(int).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]  # final index of each tie group
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thr = np.r_[np.inf, s[last]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    points = [(float(a), float(b), float(c)) for a, b, c in zip(fpr, tpr, thr)]
    return points, auc


def logit_histogram(logits, labels, edges=LOGIT_EDGES) -> dict:
    """Per-class counts of raw logits; values beyond the edges land in the end bins."""
    nu = np.clip(np.asarray(logits, dtype=float), edges[0], edges[-1])
    y = np.asarray(labels).astype(int)
    return {
        "edges": list(edges),
        "los": np.histogram(nu[y == 0], bins=edges)[0].tolist(),
        "nlos": np.histogram(nu[y == 1], bins=edges)[0].tolist(),
    }


@dataclass
class MetricsReport:
    accuracy: float
    confusion: dict
    roc_points: list = field(default_factory=list)
    auc: float | None = None
    logit_histogram: dict | None = None
    n_train: int = 0
    n_val: int = 0
    n_test: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roc_points"] = [list(p) for p in self.roc_points]
        return d


def evaluate(labels, pred, scores=None, logits=None, n_train=0, n_val=0) -> MetricsReport:
    """Report for hard predictions, with ROC when ``scores`` are given."""
    y = np.asarray(labels).astype(int)
    p = np.asarray(pred).astype(int)
    if len(y) == 0:
        raise ValueError("nothing to evaluate")
    conf = {
        "tp": int(np.sum((p == 1) & (y == 1))), "fp": int(np.sum((p == 1) & (y == 0))),
        "tn": int(np.sum((p == 0) & (y == 0))), "fn": int(np.sum((p == 0) & (y == 1))),
    }
    points, auc = [], None
    if scores is not None and 0 < y.sum() < len(y):
        points, auc = roc_auc(scores, y)
    hist = logit_histogram(logits, y) if logits is not None else None
    return MetricsReport(float(np.mean(p == y)), conf, points, auc, hist, int(n_train), int(n_val), len(y))
