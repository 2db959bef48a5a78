"""Train the twin LSTM auto-encoders on a small dataset and look at the
latents: z_t tracks penetration progress, z_demo clusters by terrain.

Budgets here are tiny so the script finishes in a couple of minutes; the full
pipeline trains on 5x100 trajectories for 40 epochs.

Run:  python3 demos/04_trajectory_encoders.py
"""

import numpy as np

from digrl.dataset import collect_dataset, merge_datasets
from digrl.encoders import (IncrementalContextEncoder, encode_demo,
                            train_autoencoder)
from digrl.terrain import get_preset

terrains = ["sand", "marble_chips"]
sets = [collect_dataset(get_preset(n), 15, seeds=10 + i)
        for i, n in enumerate(terrains)]
data = merge_datasets(sets)
print(f"training on {len(data.trajectories)} trajectories...")

enc_current = train_autoencoder(data, "current", epochs=8, seed=0, lr=1e-3)
enc_demo = train_autoencoder(data, "demo", epochs=8, seed=1, lr=1e-3)
print(f"current-encoder loss {enc_current.loss_history[0]:.3f} -> "
      f"{enc_current.loss_history[-1]:.3f}")
print(f"demo-encoder    loss {enc_demo.loss_history[0]:.3f} -> "
      f"{enc_demo.loss_history[-1]:.3f}\n")

# z_t evolves along a trajectory (streaming == full-prefix recompute)
traj = data.trajectories[0]
stream = IncrementalContextEncoder(enc_current)
print("||z_t|| along one trajectory (every 10 steps):")
norms = []
for i, c in enumerate(traj.contexts()):
    z = stream.feed(c)
    if i % 10 == 0:
        norms.append(float(np.linalg.norm(z)))
print(" ", np.round(norms, 2))

# z_demo separates the two terrains
z_by_terrain = {n: encode_demo(enc_demo, ds.by_terrain(n), k=10)
                for n, ds in zip(terrains, sets)}
gap = np.linalg.norm(z_by_terrain["sand"] - z_by_terrain["marble_chips"])
spread = np.mean([
    np.linalg.norm(encode_demo(enc_demo, sets[i].by_terrain(n)[5:], k=5)
                   - z_by_terrain[n])
    for i, n in enumerate(terrains)])
print(f"\nz_demo distance between terrains: {gap:.2f}; "
      f"within-terrain resample distance: {spread:.2f}")
