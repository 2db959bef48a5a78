"""Why vertical digging jams: drive the fixed downward baseline into each
terrain preset and watch where the controller halts.

Run:  python3 demos/01_terrain_and_jamming.py
"""

import numpy as np

from digrl.episodes import run_baseline_episode
from digrl.terrain import TERRAIN_NAMES, get_preset, make_terrain

print("Blockage fields are seeded and layered; sweeping/rotating erode them.")
grid = make_terrain(get_preset("fragmented_rocks"), seed=7)
print(f"fragmented_rocks grid: {grid.n_cells} cells x {grid.n_layers} layers, "
      f"{(grid.blockage > 0.5).mean():.0%} of cell-layers hold a blocker\n")

print(f"{'terrain':20s} {'jam rate':>8s} {'mean depth at halt':>20s}")
for name in TERRAIN_NAMES:
    spec = get_preset(name)
    outcomes = []
    depths = []
    for seed in range(40):
        traj = run_baseline_episode(spec, seed)
        outcomes.append(traj.outcome)
        if traj.outcome == "jam":
            depths.append(-traj.transitions[-1].context[1])
    rate = outcomes.count("jam") / len(outcomes)
    depth = f"{np.mean(depths) * 1000:.0f} mm" if depths else "-"
    print(f"{name:20s} {rate:8.0%} {depth:>20s}")

print("\nSand flows; the rigid presets stop the bucket well short of the "
      "50 mm target.")
