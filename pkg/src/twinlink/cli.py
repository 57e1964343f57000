"""``twinlink`` command line entry point."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .aoi import AoiConfig, prune
from .features import Perturbation, extract_features, perturb_paths, write_features_csv
from .harness.config import load_config
from .harness.experiments import (
    run_drift_protocol,
    run_static_experiment,
    write_drift_outputs,
    write_static_outputs,
)
from .harness.metrics import evaluate, roc_auc
from .harness.pipeline import AdcpmPipeline, labels
from .harness.splits import split_by_ratio
from .models import forward, gradient_check, load_checkpoint, save_checkpoint, train
from .scene import generate_grid_dataset, generate_vehicular_dataset, sample_rng
from .transform import speedup_from_reduction, reduction_factors

log = logging.getLogger("twinlink")


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated integers, got {text!r}") from None
    return a, b


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _snr(text: str) -> float:
    return math.inf if text.lower() in ("inf", "none", "off") else float(text)


def _pipeline_path(ckpt: Path) -> Path:
    return ckpt.with_name(ckpt.name + ".pipeline.json")


def _save_pipeline(ckpt: Path, pipe: AdcpmPipeline) -> None:
    _pipeline_path(ckpt).write_text(json.dumps({
        "pool": list(pipe.pool), "ref_power": pipe.ref_power, "dynamic_range_db": pipe.dynamic_range_db,
    }, sort_keys=True))


def _load_pipeline(ckpt: Path, cfg) -> AdcpmPipeline:
    meta = json.loads(_pipeline_path(ckpt).read_text())
    return AdcpmPipeline(cfg.array, cfg.ofdm, tuple(meta["pool"]), meta["ref_power"], meta["dynamic_range_db"])


# --------------------------------------------------------------------------


def cmd_gen_grid(a):
    cfg = load_config(a.config)
    n = io.write_dataset(a.out, generate_grid_dataset(cfg.scene_config()))
    print(f"wrote {n} grid samples to {a.out}")


def cmd_gen_veh(a):
    cfg = load_config(a.config)
    n = io.write_dataset(a.out, generate_vehicular_dataset(cfg.scene_config()))
    print(f"wrote {n} vehicular samples to {a.out}")


def cmd_adcpm(a):
    cfg = load_config(a.config)
    samples = io.read_dataset(a.inp)
    pool = a.pool or (1, 1)
    pipe = AdcpmPipeline(cfg.array, cfg.ofdm, pool)
    maps = pipe.raw_maps(samples, a.snr, cfg.protocol.seed)
    io.write_adcpm_jsonl(a.out, [s.id for s in samples], maps, a.pool)
    print(f"wrote {len(samples)} maps of shape {maps.shape[1:]} to {a.out}")


def cmd_speedup(a):
    fa, fb = reduction_factors(a.old, a.new)
    print(f"reduction ({fa}, {fb}) -> speedup {speedup_from_reduction(fa, fb)}")


def cmd_features(a):
    samples = io.read_dataset(a.inp)
    vectors = []
    for i, s in enumerate(samples):
        paths = s.paths
        if a.perturb == "on":
            paths = perturb_paths(paths, sample_rng(a.seed, 21, i), Perturbation())
        vectors.append(extract_features(paths))
    write_features_csv(a.out, samples, vectors)
    print(f"wrote {len(vectors)} feature rows to {a.out}")


def _up_to(samples, t_now):
    """Samples stamped at or before t_now; later ones have no age yet."""
    kept = [s for s in samples if s.timestamp <= t_now]
    if len(kept) < len(samples):
        print(f"ignoring {len(samples) - len(kept)} samples stamped after t={t_now:g}")
    return kept


def cmd_prune(a):
    samples = _up_to(io.read_dataset(a.inp), a.t_now)
    res = prune(samples, a.t_now, AoiConfig(a.gamma, a.threshold))
    io.write_dataset(a.out, res.samples)
    print(f"retained {res.retained}, dropped {res.dropped}")


def _train_common(a, state=None):
    cfg = load_config(a.config)
    samples = io.read_dataset(a.inp)
    tr, va, te = split_by_ratio(samples, cfg.protocol.split_ratios, cfg.protocol.seed)
    ages, aoi = None, None
    if a.gamma is not None:
        aoi = AoiConfig(a.gamma, cfg.aoi.threshold)
        t_now = a.t_now if a.t_now is not None else max(s.timestamp for s in samples)
        tr = prune(_up_to(tr, t_now), t_now, aoi).samples
        if not tr:
            raise SystemExit("pruned training set is empty")
        ages = np.array([t_now - s.timestamp for s in tr])
    if state is None:
        pipe = AdcpmPipeline(cfg.array, cfg.ofdm, cfg.protocol.pool, 1.0,
                             cfg.protocol.dynamic_range_db).calibrated(tr)
    else:
        pipe = _load_pipeline(Path(a.from_ckpt), cfg)
    neural = state.config if state is not None else cfg.neural
    out = train(neural, pipe.images(tr), labels(tr), pipe.images(va), labels(va), state=state,
                ages=ages, aoi=aoi, dataset_id=a.dataset_id or Path(a.inp).stem)
    save_checkpoint(out, a.out)
    _save_pipeline(Path(a.out), pipe)
    logits, probs = forward(out, pipe.images(te))
    acc = float(np.mean((probs > 0.5) == labels(te)))
    print(f"saved {a.out}: lineage {out.lineage}, {out.history[-1]['epochs']} epochs, held-out accuracy {acc:.4f}")


def cmd_train(a):
    _train_common(a)


def cmd_finetune(a):
    _train_common(a, load_checkpoint(a.from_ckpt))


def cmd_eval(a):
    cfg = load_config(a.config)
    state = load_checkpoint(a.ckpt)
    pipe = _load_pipeline(Path(a.ckpt), cfg)
    samples = io.read_dataset(a.inp)
    logits, probs = forward(state, pipe.images(samples, a.snr, cfg.protocol.seed))
    rep = evaluate(labels(samples), (probs > 0.5).astype(int), scores=logits, logits=logits)
    d = rep.to_dict()
    d.pop("roc_points")
    print(json.dumps(d, sort_keys=True))


def cmd_gradcheck(a):
    err = gradient_check(corrupt=a.corrupt, rng=np.random.default_rng(a.seed))
    ok = err <= 1e-6
    print(f"max relative error {err:.3e} ({'ok' if ok else 'MISMATCH'})")
    return 0 if ok else 1


def cmd_run_static(a):
    cfg = load_config(a.config)
    res = run_static_experiment(cfg)
    write_static_outputs(a.out, res, cfg)
    for name, rep in sorted(res.reports.items()):
        print(f"{name:18s} accuracy {rep.accuracy:.4f}")


def cmd_run_drift(a):
    cfg = load_config(a.config)
    res = run_drift_protocol(cfg, a.gammas, a.threshold)
    write_drift_outputs(a.out, res, cfg)
    print(f"static accuracy {res.static_report.accuracy:.4f}")
    for c in res.cells:
        acc = "failed" if c.accuracy is None else f"{c.accuracy:.4f}"
        print(f"gamma={c.gamma:<5g} S{c.k}: acc {acc} (frozen {res.frozen[c.k].accuracy:.4f}) "
              f"N_trn={c.n_train} N_val={c.n_val} N_tst={c.n_test}")


def cmd_roc(a):
    scores, labels_ = [], []
    with open(a.scores, newline="") as f:
        for row in csv.DictReader(f):
            scores.append(float(row["score"]))
            labels_.append(int(row["label"]))
    points, auc = roc_auc(scores, labels_)
    if a.out:
        with open(a.out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["fpr", "tpr", "threshold"])
            w.writerows([fp, tp, "inf" if math.isinf(th) else th] for fp, tp, th in points)
    print(f"auc {auc:.6f} over {len(scores)} scores")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twinlink", description="LoS/NLoS classification on a digital-twin scene")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(fn=fn)
        return sp

    for name, fn, what in (("gen-grid", cmd_gen_grid, "grid"), ("gen-veh", cmd_gen_veh, "vehicular")):
        sp = cmd(name, fn, f"generate the {what} dataset")
        sp.add_argument("--config")
        sp.add_argument("--out", required=True)

    sp = cmd("adcpm", cmd_adcpm, "dump ADCPMs of a dataset")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--snr", type=_snr, default=math.inf)
    sp.add_argument("--pool", type=_pair)
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)

    sp = cmd("speedup", cmd_speedup, "speedup of a smaller ADCPM input")
    sp.add_argument("--old", type=_pair, required=True)
    sp.add_argument("--new", type=_pair, required=True)

    sp = cmd("features", cmd_features, "path-level feature CSV")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--perturb", choices=("on", "off"), default="off")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = cmd("prune", cmd_prune, "drop samples whose freshness fell below the threshold")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--t-now", type=float, required=True)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--threshold", type=float, default=0.005)
    sp.add_argument("--out", required=True)

    for name, fn in (("train", cmd_train), ("finetune", cmd_finetune)):
        sp = cmd(name, fn, f"{name} the network on a dataset (70/20/10 split)")
        sp.add_argument("--in", dest="inp", required=True)
        sp.add_argument("--config")
        sp.add_argument("--gamma", type=float, help="AoI weighting; ages taken at --t-now")
        sp.add_argument("--t-now", type=float)
        sp.add_argument("--dataset-id")
        sp.add_argument("--out", required=True)
        if name == "finetune":
            sp.add_argument("--from", dest="from_ckpt", required=True)

    sp = cmd("eval", cmd_eval, "score a checkpoint on a dataset")
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--snr", type=_snr, default=math.inf)
    sp.add_argument("--config")

    sp = cmd("gradcheck", cmd_gradcheck, "finite-difference check of backpropagation")
    sp.add_argument("--corrupt", action="store_true", help="inject a gradient fault")
    sp.add_argument("--seed", type=int, default=0)

    sp = cmd("run-static", cmd_run_static, "static-scene benchmark")
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)

    sp = cmd("run-drift", cmd_run_drift, "drift and fine-tuning protocol")
    sp.add_argument("--config")
    sp.add_argument("--gammas", type=_floats)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--out", required=True)

    sp = cmd("roc", cmd_roc, "ROC curve and AUC from a score,label CSV")
    sp.add_argument("--scores", required=True)
    sp.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"twinlink: error: {exc}", file=sys.stderr)
        return 2
    return int(rc or 0)


if __name__ == "__main__":
    sys.exit(main())
