"""Drift and recovery: a grid-trained network meets traffic.

The static model never saw vehicles. Cars hidden behind buses but lit by a
truck's reflection look like LoS to it, so its accuracy drops in each test
window. Fine-tuning on the recent, AoI-pruned samples wins it back.

The light config trains for three epochs per stage, so recovery is partial.
For the full picture run

    python demos/06_drift.py configs/desk.toml 0.4

(about 40 s). Small gammas on the desk config keep tens of thousands of
samples and take much longer.
"""
import sys

from twinlink.harness import light_config, load_config, run_drift_protocol

cfg = load_config(sys.argv[1]) if len(sys.argv) > 1 else light_config()
gammas = tuple(float(g) for g in sys.argv[2].split(",")) if len(sys.argv) > 2 else (0.01, 0.1, 0.4)
res = run_drift_protocol(cfg, gammas)
print(f"static model on held-out grid: {res.static_report.accuracy:.3f}")
for k, rep in sorted(res.frozen.items()):
    print(f"  frozen on window S{k}: {rep.accuracy:.3f}")
print("gamma  stage  kept/available     acc  lineage")
for c in res.cells:
    acc = "failed" if c.accuracy is None else f"{c.accuracy:.3f}"
    print(f"{c.gamma:<6g} S{c.k}    {c.n_train:6d}/{c.n_available:<6d}  {acc:>6}  {'>'.join(c.lineage)}")
