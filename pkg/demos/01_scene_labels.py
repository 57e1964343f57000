"""Ray-trace the desk scene and look at where the blocked receivers are.

Prints an ASCII map of the static grid ('.' LoS, '#' NLoS, blank where the
cell is inside a building or receives nothing), then the label balance of
the vehicular run over time. Stray '#' cells in open ground are the random
LoS dropouts.
"""
import numpy as np

from twinlink.harness import light_config
from twinlink.scene import GenerationStats, generate_grid_dataset, generate_vehicular_dataset, grid_positions

cfg = light_config()
scene = cfg.scene_config()
stats = GenerationStats()
grid = generate_grid_dataset(scene, stats)
print(f"grid: {len(grid)} receivers, {stats.dropped_inside_blocker} inside buildings, "
      f"{stats.dropped_no_path} with no path")

pos = grid_positions(scene)
cols = int(round(scene.extent[0] / scene.grid_cell))
rows = int(round(scene.extent[1] / scene.grid_cell))
cells = np.full((rows, cols), " ")
for s in grid:
    x, y, _ = pos[int(s.id[1:])]  # grid ids carry the cell index
    cells[int(y // scene.grid_cell), int(x // scene.grid_cell)] = "#" if s.label else "."
print("north up, BS on the bottom edge:")
for row in cells[::-1]:
    print("  " + "".join(row))

veh = generate_vehicular_dataset(scene)
t = np.array([s.timestamp for s in veh])
y = np.array([s.label for s in veh])
print(f"vehicular: {len(veh)} samples over {t.max():.0f} s, NLoS share {y.mean():.2f}")
for lo in range(0, 300, 50):
    m = (t >= lo) & (t < lo + 50)
    print(f"  [{lo:3d}, {lo + 50:3d}) s: {m.sum():4d} samples, NLoS {y[m].mean():.2f}")
