"""Freshness weights and pruning on a vehicular stream, then the weighted loss."""
import math

import numpy as np

from twinlink.aoi import AoiConfig, WeightedBatch, aoi_loss, bce_loss, prune
from twinlink.harness import light_config
from twinlink.scene import generate_vehicular_dataset

cfg = light_config()
veh = generate_vehicular_dataset(cfg.scene_config())
t_now = 190.0
past = [s for s in veh if s.timestamp < t_now]
print(f"{len(past)} samples stamped before t = {t_now:g} s")
for gamma in (0.01, 0.05, 0.1, 0.2, 0.4):
    aoi = AoiConfig(gamma, 0.005)
    kept = prune(past, t_now, aoi)
    print(f"  gamma {gamma:<5g} max age {aoi.max_age:7.2f} s  keeps {kept.retained:5d} "
          f"({kept.retained / len(past):.1%})")

# the same predictions scored with and without age weighting
rng = np.random.default_rng(0)
p = rng.uniform(0.05, 0.95, len(past))
y = np.array([s.label for s in past])
ages = np.array([t_now - s.timestamp for s in past])
plain = bce_loss(WeightedBatch(p, y, ages), "mean")
for gamma in (0.0, 0.01, 0.1):
    w = aoi_loss(WeightedBatch(p, y, ages, gamma), "mean")
    print(f"mean loss, gamma {gamma:<4g}: {w:.4f} (unweighted {plain:.4f})")
print(f"one sample, p=0.5, age 10 s, gamma 0.1: {aoi_loss(WeightedBatch([0.5], [1], [10.0], 0.1)):.9f}"
      f" = ln2/e = {math.log(2) / math.e:.9f}")
