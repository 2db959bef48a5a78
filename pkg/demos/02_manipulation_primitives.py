"""The three manipulation primitives and their limit logic.

sweep oscillates laterally between force/displacement limits, rotate swings
the pitch between moment/angle limits, penetrate pushes down and lifts to
relieve the vertical force limit. All three erode the blockage under the
teeth, which is what eventually lets the bucket through.

Run:  python3 demos/02_manipulation_primitives.py
"""

import numpy as np

from digrl.episodes import EpisodeRunner
from digrl.primitives import NormalizedAction, denormalize_action
from digrl.terrain import get_preset

action = NormalizedAction(np.array([
    0.8,    # sweep velocity
    0.0,    # sweep force limit (mid-range)
    0.0,    # sweep displacement limit
    0.6,    # rotate velocity
    0.0,    # rotate moment limit
    0.0,    # rotate angle limit
    -1.0,   # penetrate at full downward speed
    -0.5,   # conservative vertical force limit
]))
print("normalized action:", np.array2string(action.a, precision=2))
print("denormalized:", denormalize_action(action), "\n")

runner = EpisodeRunner(get_preset("marble_chips"), seed=3)
print(f"{'step':>4s} {'depth mm':>9s} {'fz max N':>9s} {'fx max N':>9s} "
      f"{'lifting':>8s} {'sweep dir':>9s}")
while not runner.done:
    runner.step(action)
    s = runner.last_summary
    if runner.steps % 5 == 0 or runner.done:
        print(f"{runner.steps:4d} {s.end_depth * 1000:9.1f} "
              f"{s.max_abs_force[1]:9.1f} {s.max_abs_force[0]:9.1f} "
              f"{str(runner.limits.lifting):>8s} {runner.limits.sweep_dir:9d}")

traj = runner.trajectory()
print(f"\noutcome: {traj.outcome} after {len(traj)} steps, "
      f"max contact force {traj.max_force:.1f} N (halt threshold is 90 N)")
print("The limit logic keeps forces bounded, so the primitives never jam.")
