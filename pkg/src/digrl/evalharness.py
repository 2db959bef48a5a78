"""Evaluation protocol: multi-trial reward statistics, duration/force metrics,
the vertical-downward baseline, jamming-free-rate curves, and CSV reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import Dataset
from .encoders import EncoderParams
from .episodes import (AGENT_DT, RewardParams, Trajectory,
                       make_scripted_policy, run_baseline_episode, run_episode)
from .iql import AgentCheckpoint, rollout_policy
from .sim import SimConfig
from .terrain import TerrainSpec

# Fig.-style threshold grid: spans the primitive force limits up to stall.
THRESHOLD_GRID = tuple(float(t) for t in range(30, 111, 5))


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    reward: float
    duration: float  # s
    avg_force: float  # mean over steps of ||mean force vector||
    max_force: float
    outcome: str


@dataclass
class EvalReport:
    terrain: str
    policy_id: str
    trials: int
    reward_mean: float
    reward_std: float
    mean_duration: float
    mean_avg_force: float
    jam_count: int
    success_count: int
    records: list[TrialRecord]
    single_trial: bool = False


@dataclass(frozen=True)
class CurvePoint:
    threshold: float
    jamming_free_rate: float


def trial_seed(base_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([base_seed, 0x7E57, trial]).generate_state(1)[0])


def trajectory_record(traj: Trajectory, seed: int) -> TrialRecord:
    forces = traj.contexts()[:, 6:9]
    avg_force = float(np.linalg.norm(forces, axis=1).mean()) if len(traj) else 0.0
    return TrialRecord(seed=seed, reward=traj.reward_sum(),
                       duration=len(traj) * AGENT_DT, avg_force=avg_force,
                       max_force=traj.max_force, outcome=traj.outcome)


def evaluate_runner(runner: Callable[[int], Trajectory], terrain: str,
                    policy_id: str, trials: int, seed: int) -> EvalReport:
    """Run `trials` episodes on derived seeds and aggregate."""
    records = []
    for k in range(trials):
        s = trial_seed(seed, k)
        records.append(trajectory_record(runner(s), s))
    rewards = np.array([r.reward for r in records])
    single = trials == 1
    std = 0.0 if single else float(np.std(rewards, ddof=1))
    return EvalReport(
        terrain=terrain, policy_id=policy_id, trials=trials,
        reward_mean=float(rewards.mean()), reward_std=std,
        mean_duration=float(np.mean([r.duration for r in records])),
        mean_avg_force=float(np.mean([r.avg_force for r in records])),
        jam_count=sum(r.outcome == "jam" for r in records),
        success_count=sum(r.outcome == "success" for r in records),
        records=records, single_trial=single)


def evaluate_policy(ckpt: AgentCheckpoint, encoder: EncoderParams,
                    z_demo: np.ndarray, spec: TerrainSpec, trials: int,
                    seed: int, policy_id: str | None = None,
                    cfg: SimConfig | None = None,
                    reward: RewardParams | None = None) -> EvalReport:
    runner = lambda s: rollout_policy(spec, s, ckpt, encoder, z_demo,
                                      mode="eval", cfg=cfg, reward=reward)
    return evaluate_runner(runner, spec.name, policy_id or ckpt.algo,
                           trials, seed)


def evaluate_baseline(spec: TerrainSpec, trials: int, seed: int,
                      cfg: SimConfig | None = None,
                      reward: RewardParams | None = None) -> EvalReport:
    runner = lambda s: run_baseline_episode(spec, s, cfg=cfg, reward=reward)
    return evaluate_runner(runner, spec.name, "vertical_baseline", trials, seed)


def evaluate_scripted(spec: TerrainSpec, trials: int, seed: int,
                      cfg: SimConfig | None = None,
                      reward: RewardParams | None = None) -> EvalReport:
    def runner(s):
        rng = np.random.default_rng(np.random.SeedSequence([s, 7]))
        return run_episode(spec, s, make_scripted_policy(rng), cfg=cfg,
                           reward=reward)
    return evaluate_runner(runner, spec.name, "scripted", trials, seed)


def dataset_report(ds: Dataset, terrain: str, policy_id: str = "demonstrations"
                   ) -> EvalReport:
    """Aggregate the stored demonstration trajectories like an evaluation."""
    trajs = ds.by_terrain(terrain)
    records = [trajectory_record(t, t.seed) for t in trajs]
    rewards = np.array([r.reward for r in records])
    single = len(records) == 1
    return EvalReport(
        terrain=terrain, policy_id=policy_id, trials=len(records),
        reward_mean=float(rewards.mean()),
        reward_std=0.0 if single else float(np.std(rewards, ddof=1)),
        mean_duration=float(np.mean([r.duration for r in records])),
        mean_avg_force=float(np.mean([r.avg_force for r in records])),
        jam_count=sum(r.outcome == "jam" for r in records),
        success_count=sum(r.outcome == "success" for r in records),
        records=records, single_trial=single)


def jamming_free_curve(records: Sequence[TrialRecord],
                       thresholds: Sequence[float] = THRESHOLD_GRID
                       ) -> list[CurvePoint]:
    """rate(theta) = fraction of trajectories whose max contact force stayed
    at or below theta."""
    if not records:
        raise ValueError("jamming_free_curve needs at least one record")
    max_forces = np.array([r.max_force for r in records])
    return [CurvePoint(threshold=float(t),
                       jamming_free_rate=float((max_forces <= t).mean()))
            for t in thresholds]


def curve_dominates(upper: Sequence[CurvePoint], lower: Sequence[CurvePoint]
                    ) -> bool:
    assert len(upper) == len(lower)
    return all(u.jamming_free_rate >= l.jamming_free_rate - 1e-12
               for u, l in zip(upper, lower))


# --- report files ---

def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


SUMMARY_COLUMNS = ("policy", "terrain", "trials", "reward_mean", "reward_std",
                   "mean_duration", "mean_avg_force", "jam_count",
                   "success_count")


def emit_report(reports: Sequence[EvalReport],
                curves: dict[tuple[str, str], Sequence[CurvePoint]] | None,
                path: str | Path) -> list[Path]:
    """Write summary.csv, per-(policy, terrain) curve CSVs, and a plain-text
    table; returns the written paths."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    written = []

    summary = path / "summary.csv"
    with open(summary, "w", encoding="utf-8") as f:
        f.write(",".join(SUMMARY_COLUMNS) + "\n")
        for r in reports:
            row = (r.policy_id, r.terrain, r.trials, r.reward_mean,
                   r.reward_std, r.mean_duration, r.mean_avg_force,
                   r.jam_count, r.success_count)
            f.write(",".join(_fmt(v) for v in row) + "\n")
    written.append(summary)

    for (policy_id, terrain), points in (curves or {}).items():
        p = path / f"curve_{policy_id}_{terrain}.csv"
        with open(p, "w", encoding="utf-8") as f:
            f.write("threshold,jamming_free_rate\n")
            for pt in points:
                f.write(f"{_fmt(pt.threshold)},{_fmt(pt.jamming_free_rate)}\n")
        written.append(p)

    table = path / "summary.txt"
    with open(table, "w", encoding="utf-8") as f:
        f.write(format_table(reports) + "\n")
    written.append(table)
    return written


def format_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text policy x terrain table of reward mean +/- std."""
    policies = []
    terrains = []
    for r in reports:
        if r.policy_id not in policies:
            policies.append(r.policy_id)
        if r.terrain not in terrains:
            terrains.append(r.terrain)
    cell = {(r.policy_id, r.terrain): r for r in reports}
    width = 22
    lines = ["Terrains".ljust(width) + "".join(t.ljust(width) for t in terrains)]
    for p in policies:
        row = [p.ljust(width)]
        for t in terrains:
            r = cell.get((p, t))
            if r is None:
                row.append("-".ljust(width))
            elif r.jam_count == r.trials and r.trials > 0:
                row.append("Jamming".ljust(width))
            else:
                row.append(f"{r.reward_mean:.2f} +/- {r.reward_std:.2f}".ljust(width))
        lines.append("".join(row))
    return "\n".join(lines)


# --- JSON round trip for eval records (consumed by the curve subcommand) ---

def report_to_dict(report: EvalReport) -> dict:
    return {
        "terrain": report.terrain, "policy_id": report.policy_id,
        "trials": report.trials, "reward_mean": report.reward_mean,
        "reward_std": report.reward_std, "mean_duration": report.mean_duration,
        "mean_avg_force": report.mean_avg_force, "jam_count": report.jam_count,
        "success_count": report.success_count,
        "single_trial": report.single_trial,
        "records": [{"seed": r.seed, "reward": r.reward, "duration": r.duration,
                     "avg_force": r.avg_force, "max_force": r.max_force,
                     "outcome": r.outcome} for r in report.records],
    }


def report_from_dict(data: dict) -> EvalReport:
    records = [TrialRecord(seed=int(r["seed"]), reward=float(r["reward"]),
                           duration=float(r["duration"]),
                           avg_force=float(r["avg_force"]),
                           max_force=float(r["max_force"]),
                           outcome=r["outcome"]) for r in data["records"]]
    return EvalReport(terrain=data["terrain"], policy_id=data["policy_id"],
                      trials=int(data["trials"]),
                      reward_mean=float(data["reward_mean"]),
                      reward_std=float(data["reward_std"]),
                      mean_duration=float(data["mean_duration"]),
                      mean_avg_force=float(data["mean_avg_force"]),
                      jam_count=int(data["jam_count"]),
                      success_count=int(data.get("success_count", 0)),
                      records=records,
                      single_trial=bool(data.get("single_trial", False)))
