"""Static-scene benchmark and the staged drift / fine-tuning protocol."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..aoi import AoiConfig, prune
from ..features import Perturbation, extract_features, perturb_paths
from ..models import ModelState, fit_forest, fit_svm, forward, train
from ..scene import Sample, generate_grid_dataset, generate_vehicular_dataset, sample_rng
from .config import ExperimentConfig
from .metrics import MetricsReport, evaluate
from .pipeline import NOISE_AUGMENT, NOISE_EVAL, AdcpmPipeline, labels
from .splits import EmptySplitError, SplitSpec, composite, split_by_ratio, split_by_time

log = logging.getLogger(__name__)

_PERTURB_STREAM = 21


class ImageCache:
    """Pipeline images keyed by (sample id, snr), with stable per-sample noise indices."""

    def __init__(self, pipeline: AdcpmPipeline, seed: int, index_of: dict[str, int]):
        self.pipeline = pipeline
        self.seed = seed
        self.index_of = index_of
        self._store: dict[tuple[str, float, int], np.ndarray] = {}

    def get(self, samples: Sequence[Sample], snr_db: float = math.inf, stream: int = NOISE_EVAL) -> np.ndarray:
        missing = [s for s in samples if (s.id, snr_db, stream) not in self._store]
        if missing:
            imgs = self.pipeline.images(missing, snr_db, self.seed, stream, [self.index_of[s.id] for s in missing])
            for s, im in zip(missing, imgs):
                self._store[(s.id, snr_db, stream)] = im
        shape = self.pipeline.image_shape
        if not samples:
            return np.zeros((0,) + shape, dtype=np.float32)
        return np.stack([self._store[(s.id, snr_db, stream)] for s in samples])


def _neural_report(state: ModelState, x, y, n_train=0, n_val=0) -> MetricsReport:
    logits, probs = forward(state, x)
    return evaluate(y, (probs > 0.5).astype(int), scores=logits, logits=logits, n_train=n_train, n_val=n_val)


# --------------------------------------------------------------------------
# static scene


@dataclass
class StaticResult:
    reports: dict[str, MetricsReport]
    snr_table: list[dict]
    n_grid: int
    nlos_fraction: float
    static_state: ModelState | None = None
    pipeline: AdcpmPipeline | None = None

    def to_dict(self) -> dict:
        return {
            "n_grid": self.n_grid,
            "nlos_fraction": self.nlos_fraction,
            "reports": {k: v.to_dict() for k, v in sorted(self.reports.items())},
            "snr_table": self.snr_table,
        }


def _perturbed_features(samples, seed, cfg=Perturbation()):
    rows = []
    for i, s in enumerate(samples):
        paths = perturb_paths(s.paths, sample_rng(seed, _PERTURB_STREAM, i), cfg)
        rows.append(extract_features(paths).as_array())
    return np.array(rows)


def run_static_experiment(cfg: ExperimentConfig, grid: Sequence[Sample] | None = None) -> StaticResult:
    """Train on the grid dataset and score every model on its held-out split.

    The neural model is trained twice: on clean images, and (if enabled) on
    clean plus noisy copies at the augmentation SNR. Test inputs are never
    augmented; they only get the noise level of the sweep row being scored.
    """
    p = cfg.protocol
    scene = cfg.scene_config()
    grid = list(grid) if grid is not None else generate_grid_dataset(scene)
    train_s, val_s, test_s = split_by_ratio(grid, p.split_ratios, p.seed)
    pipe = AdcpmPipeline(cfg.array, cfg.ofdm, p.pool, 1.0, p.dynamic_range_db).calibrated(train_s)
    cache = ImageCache(pipe, p.seed, {s.id: i for i, s in enumerate(grid)})
    ntr, nva = len(train_s), len(val_s)
    y_tr, y_va, y_te = labels(train_s), labels(val_s), labels(test_s)
    reports: dict[str, MetricsReport] = {}

    x_tr, x_va, x_te = cache.get(train_s), cache.get(val_s), cache.get(test_s)
    state = train(cfg.neural, x_tr, y_tr, x_va, y_va, dataset_id="G")
    reports["neural"] = _neural_report(state, x_te, y_te, ntr, nva)

    models = {"neural": state}
    if p.augment:
        xa_tr = np.concatenate([x_tr, cache.get(train_s, p.augment_snr, NOISE_AUGMENT)])
        xa_va = np.concatenate([x_va, cache.get(val_s, p.augment_snr, NOISE_AUGMENT)])
        aug = train(cfg.neural, xa_tr, np.r_[y_tr, y_tr], xa_va, np.r_[y_va, y_va], dataset_id="G+aug")
        reports["neural_aug"] = _neural_report(aug, x_te, y_te, 2 * ntr, 2 * nva)
        models["neural_aug"] = aug

    if p.sml:
        f_tr = np.array([extract_features(s.paths).as_array() for s in train_s])
        f_te = np.array([extract_features(s.paths).as_array() for s in test_s])
        f_te_noisy = _perturbed_features(test_s, p.seed)
        forest = fit_forest(f_tr, y_tr, cfg.forest)
        reports["forest"] = evaluate(y_te, forest.predict(f_te), scores=forest.predict_proba(f_te),
                                     n_train=ntr, n_val=nva)
        reports["forest_perturbed"] = evaluate(y_te, forest.predict(f_te_noisy), n_train=ntr, n_val=nva)
        svm = fit_svm(f_tr, y_tr, cfg.svm)
        reports["svm"] = evaluate(y_te, svm.predict(f_te), scores=svm.decision_function(f_te),
                                  n_train=ntr, n_val=nva)
        reports["svm_perturbed"] = evaluate(y_te, svm.predict(f_te_noisy), n_train=ntr, n_val=nva)

    table = []
    for snr in (math.inf,) + tuple(p.snr_sweep):
        row = {"snr_db": "inf" if math.isinf(snr) else float(snr)}
        x = cache.get(test_s, snr)
        for name, st in models.items():
            _, probs = forward(st, x)
            row[name] = float(np.mean((probs > 0.5) == y_te))
        table.append(row)
    y_all = labels(grid)
    return StaticResult(reports, table, len(grid), float(y_all.mean()), state, pipe)


# --------------------------------------------------------------------------
# drift protocol


@dataclass
class StageCell:
    gamma: float
    k: int
    t_k: float
    status: str
    n_available: int
    n_train: int
    n_val: int
    n_test: int
    report: MetricsReport | None = None
    lineage: list[str] = field(default_factory=list)
    epochs: int = 0
    best_epoch: int = 0
    reason: str = ""

    @property
    def accuracy(self) -> float | None:
        return self.report.accuracy if self.report else None

    @property
    def retained_fraction(self) -> float:
        return self.n_train / self.n_available if self.n_available else 0.0

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "k": self.k, "t_k": self.t_k, "status": self.status,
            "accuracy": self.accuracy, "n_available": self.n_available, "n_train": self.n_train,
            "n_val": self.n_val, "n_test": self.n_test, "retained_fraction": self.retained_fraction,
            "lineage": self.lineage, "epochs": self.epochs, "best_epoch": self.best_epoch,
            "reason": self.reason, "report": self.report.to_dict() if self.report else None,
        }


@dataclass
class DriftResult:
    static_report: MetricsReport
    frozen: dict[int, MetricsReport]
    cells: list[StageCell]
    gammas: tuple[float, ...]
    threshold: float
    n_grid: int
    n_vehicular: int

    def cell(self, gamma: float, k: int) -> StageCell:
        for c in self.cells:
            if c.gamma == gamma and c.k == k:
                return c
        raise KeyError((gamma, k))

    def to_dict(self) -> dict:
        return {
            "gammas": list(self.gammas),
            "threshold": self.threshold,
            "n_grid": self.n_grid,
            "n_vehicular": self.n_vehicular,
            "static": self.static_report.to_dict(),
            "frozen": {str(k): r.to_dict() for k, r in sorted(self.frozen.items())},
            "cells": [c.to_dict() for c in self.cells],
        }


def run_drift_protocol(cfg: ExperimentConfig, gammas: Sequence[float] | None = None,
                       threshold: float | None = None, *, grid: Sequence[Sample] | None = None,
                       vehicular: Sequence[Sample] | None = None) -> DriftResult:
    """Static model on the grid, then a fine-tuning chain per gamma over the stage times.

    Each stage k prunes the training part of its composite dataset, fine-tunes
    the previous stage's model with AoI-weighted loss and scores the stage's
    test window. The frozen static model is scored on the same windows.
    """
    p = cfg.protocol
    gammas = tuple(p.gammas if gammas is None else gammas)
    threshold = cfg.aoi.threshold if threshold is None else threshold
    scene = cfg.scene_config()
    grid = list(grid) if grid is not None else generate_grid_dataset(scene)
    vehicular = list(vehicular) if vehicular is not None else generate_vehicular_dataset(scene)
    index_of = {s.id: i for i, s in enumerate(grid + vehicular)}

    g_tr, g_va, g_te = split_by_ratio(grid, p.split_ratios, p.seed)
    pipe = AdcpmPipeline(cfg.array, cfg.ofdm, p.pool, 1.0, p.dynamic_range_db).calibrated(g_tr)
    cache = ImageCache(pipe, p.seed, index_of)
    snr = p.drift_snr
    static = train(cfg.neural, cache.get(g_tr, snr), labels(g_tr), cache.get(g_va, snr), labels(g_va),
                   dataset_id="G")
    static_report = _neural_report(static, cache.get(g_te, snr), labels(g_te), len(g_tr), len(g_va))

    stages = []
    for k, t_k in enumerate(p.stage_times, 1):
        s_k = composite(grid, vehicular, t_k, p.window)
        tr, va, te = split_by_time(s_k, SplitSpec.for_stage(t_k, p.window))
        test_ids = {s.id for s in te}
        if test_ids & {s.id for s in tr + va}:
            raise RuntimeError(f"stage {k}: test samples leaked into train/val")
        stages.append((k, t_k, tr, va, te))
    frozen = {k: _neural_report(static, cache.get(te, snr), labels(te), len(tr), len(va))
              for k, _, tr, va, te in stages}

    cells = []
    for gamma in gammas:
        aoi = AoiConfig(gamma, threshold)
        state = static
        for k, t_k, tr, va, te in stages:
            t_ref = t_k if p.age_reference == "detection" else t_k + p.window
            kept = prune(tr, t_ref, aoi).samples
            cell = StageCell(gamma, k, t_k, "ok", len(tr), len(kept), len(va), len(te))
            if not kept:
                cell.status, cell.reason = "failed", "pruned training set is empty"
                cell.lineage = list(state.lineage)
                cells.append(cell)
                log.warning("gamma=%g stage %d: %s", gamma, k, cell.reason)
                continue
            ages = np.array([t_ref - s.timestamp for s in kept])
            state = train(cfg.neural, cache.get(kept, snr), labels(kept), cache.get(va, snr), labels(va),
                          state=state, ages=ages, aoi=aoi, dataset_id=f"S{k}")
            cell.report = _neural_report(state, cache.get(te, snr), labels(te), len(kept), len(va))
            cell.lineage = list(state.lineage)
            cell.epochs = state.history[-1]["epochs"]
            cell.best_epoch = state.history[-1]["best_epoch"]
            cells.append(cell)
            log.info("gamma=%g stage %d: kept %d/%d, acc %.4f", gamma, k, len(kept), len(tr),
                     cell.report.accuracy)
    return DriftResult(static_report, frozen, cells, gammas, threshold, len(grid), len(vehicular))


# --------------------------------------------------------------------------
# persistence


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def write_metrics_json(path: str | Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(payload), f, indent=1, sort_keys=True)
        f.write("\n")


def _write_hist_rows(w, context, gamma, k, hist):
    if not hist:
        return
    edges = hist["edges"]
    for cls in ("los", "nlos"):
        for i, c in enumerate(hist[cls]):
            w.writerow([context, gamma, k, cls, edges[i], edges[i + 1], c])


def _write_roc_rows(w, context, gamma, k, report):
    for fpr, tpr, thr in report.roc_points:
        w.writerow([context, gamma, k, fpr, tpr, "inf" if math.isinf(thr) else thr])


def write_static_outputs(out_dir: str | Path, result: StaticResult, cfg: ExperimentConfig) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_json(out / "metrics.json", {"config": cfg.to_dict(), "static": result.to_dict()})
    with open(out / "snr_table.csv", "w", newline="") as f:
        cols = list(result.snr_table[0])
        w = csv.writer(f)
        w.writerow(cols)
        for row in result.snr_table:
            w.writerow([row[c] for c in cols])
    with open(out / "roc.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["model", "gamma", "k", "fpr", "tpr", "threshold"])
        for name, rep in sorted(result.reports.items()):
            _write_roc_rows(w, name, "", "", rep)
    with open(out / "logits_hist.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["context", "gamma", "k", "class", "bin_lo", "bin_hi", "count"])
        for name, rep in sorted(result.reports.items()):
            _write_hist_rows(w, name, "", "", rep.logit_histogram)


def write_drift_outputs(out_dir: str | Path, result: DriftResult, cfg: ExperimentConfig) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_json(out / "metrics.json", {"config": cfg.to_dict(), "drift": result.to_dict()})
    with open(out / "table3.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["gamma", "k", "t_k", "status", "accuracy", "frozen_accuracy", "n_trn", "n_val", "n_tst",
                    "n_available", "retained_fraction"])
        for c in result.cells:
            acc = "" if c.accuracy is None else c.accuracy
            w.writerow([c.gamma, c.k, c.t_k, c.status, acc, result.frozen[c.k].accuracy, c.n_train, c.n_val,
                        c.n_test, c.n_available, c.retained_fraction])
    with open(out / "roc.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["model", "gamma", "k", "fpr", "tpr", "threshold"])
        _write_roc_rows(w, "static", "", "", result.static_report)
        for k, rep in sorted(result.frozen.items()):
            _write_roc_rows(w, "frozen", "", k, rep)
        for c in result.cells:
            if c.report:
                _write_roc_rows(w, "finetuned", c.gamma, c.k, c.report)
    with open(out / "logits_hist.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["context", "gamma", "k", "class", "bin_lo", "bin_hi", "count"])
        _write_hist_rows(w, "static", "", "", result.static_report.logit_histogram)
        for k, rep in sorted(result.frozen.items()):
            _write_hist_rows(w, "frozen", "", k, rep.logit_histogram)
        for c in result.cells:
            if c.report:
                _write_hist_rows(w, "finetuned", c.gamma, c.k, c.report.logit_histogram)


__all__ = [
    "DriftResult", "EmptySplitError", "ImageCache", "StageCell", "StaticResult", "run_drift_protocol",
    "run_static_experiment", "write_drift_outputs", "write_metrics_json", "write_static_outputs",
]
