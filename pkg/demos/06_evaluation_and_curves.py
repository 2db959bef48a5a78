"""Evaluation metrics and the jamming-free-rate curve on one terrain.

Compares the vertical-downward baseline against the scripted demonstration
policy: multi-trial reward statistics, duration/force metrics, and the
fraction of trajectories whose peak contact force stays under a given
allowance.

Run:  python3 demos/06_evaluation_and_curves.py
"""

from digrl.evalharness import (THRESHOLD_GRID, emit_report, evaluate_baseline,
                               evaluate_scripted, format_table,
                               jamming_free_curve)
from digrl.terrain import get_preset

spec = get_preset("wood_blocks")
baseline = evaluate_baseline(spec, trials=10, seed=1)
scripted = evaluate_scripted(spec, trials=10, seed=1)

print(format_table([baseline, scripted]))
print()
for r in (baseline, scripted):
    print(f"{r.policy_id:18s} jams {r.jam_count}/{r.trials}, "
          f"duration {r.mean_duration:.1f}s, avg force {r.mean_avg_force:.1f} N")

print(f"\n{'threshold N':>11s} {'baseline':>9s} {'scripted':>9s}")
for b, s in zip(jamming_free_curve(baseline.records),
                jamming_free_curve(scripted.records)):
    print(f"{b.threshold:11.0f} {b.jamming_free_rate:9.2f} "
          f"{s.jamming_free_rate:9.2f}")

written = emit_report([baseline, scripted],
                      {("baseline", spec.name): jamming_free_curve(baseline.records),
                       ("scripted", spec.name): jamming_free_curve(scripted.records)},
                      "/tmp/digrl_demo_reports")
print(f"\nwrote {[str(p) for p in written]}")
