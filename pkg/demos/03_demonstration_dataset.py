"""Collect a small scripted demonstration dataset and inspect it.

The scripted policy samples all eight primitive parameters uniformly each
step; episodes end at the 50 mm target depth, on a controller halt, or at the
150-step cap.

Run:  python3 demos/03_demonstration_dataset.py
"""

import numpy as np

from digrl.dataset import collect_dataset, load_dataset, merge_datasets, save_dataset
from digrl.terrain import get_preset

sand = collect_dataset(get_preset("sand"), n_scripted=20, seeds=1)
chips = collect_dataset(get_preset("marble_chips"), n_scripted=20, seeds=2)

for ds in (sand, chips):
    name = ds.terrains[0]
    lengths = [len(t) for t in ds.trajectories]
    rewards = [t.reward_sum() for t in ds.trajectories]
    outcomes = {o: sum(t.outcome == o for t in ds.trajectories)
                for o in ("success", "jam", "timeout")}
    print(f"{name:14s} mean length {np.mean(lengths):5.1f}  "
          f"mean reward {np.mean(rewards):7.1f}  outcomes {outcomes}")

merged = merge_datasets([sand, chips])
save_dataset(merged, "/tmp/digrl_demo_dataset")
reloaded = load_dataset("/tmp/digrl_demo_dataset")
print(f"\nsaved + reloaded: {len(reloaded.trajectories)} trajectories, "
      f"terrains {reloaded.terrains}, {reloaded.n_transitions()} transitions")
print("normalization stats (first 3 dims):",
      np.round(reloaded.norm_stats.obs_mean[:3], 4))
