"""Static benchmark: every classifier on the grid, then the network under noise.

Uses the light config so it finishes in a few seconds; pass a TOML path to
run something else (configs/desk.toml for the full sweep).
"""
import sys

from twinlink.harness import light_config, load_config, run_static_experiment

cfg = load_config(sys.argv[1]) if len(sys.argv) > 1 else light_config()
res = run_static_experiment(cfg)
print(f"{res.n_grid} grid samples, NLoS share {res.nlos_fraction:.2f}")
for name, rep in sorted(res.reports.items()):
    auc = "" if rep.auc is None else f"  auc {rep.auc:.3f}"
    print(f"  {name:17s} acc {rep.accuracy:.3f}{auc}")
print("accuracy vs SNR (dB):")
for row in res.snr_table:
    print(f"  {row['snr_db']!s:>5}  clean-trained {row['neural']:.3f}  noise-augmented {row['neural_aug']:.3f}")
