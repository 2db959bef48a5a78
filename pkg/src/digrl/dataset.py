"""Offline dataset assembly and persistence.

On-disk layout: a directory holding `meta.json` (schema version, terrain set,
normalization stats, reward params, generation seeds) and `trajectories.jsonl`
(one JSON object per trajectory). Floats are serialized with shortest
round-trip decimal repr, so save -> load is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError
from .episodes import (OUTCOMES, RewardParams, Trajectory, Transition,
                       make_scripted_policy, run_episode)
from .obs import CONTEXT_DIM, NormStats
from .primitives import ACTION_DIM
from .sim import SimConfig
from .terrain import TerrainSpec

DATASET_SCHEMA_VERSION = 1

META_NAME = "meta.json"
TRAJ_NAME = "trajectories.jsonl"


@dataclass
class Dataset:
    trajectories: list[Trajectory]
    norm_stats: NormStats
    reward: RewardParams = field(default_factory=RewardParams)
    generation_seeds: dict = field(default_factory=dict)
    schema_version: int = DATASET_SCHEMA_VERSION

    @property
    def terrains(self) -> list[str]:
        return sorted({t.terrain for t in self.trajectories})

    def n_transitions(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def all_contexts(self) -> np.ndarray:
        return np.concatenate([t.contexts() for t in self.trajectories], axis=0)

    def by_terrain(self, terrain: str) -> list[Trajectory]:
        return [t for t in self.trajectories if t.terrain == terrain]


def episode_seed(base_seed: int, index: int) -> int:
    """Derived per-episode seed: deterministic, collision-free across indices."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def collect_dataset(spec: TerrainSpec, n_scripted: int, seeds: int | list[int],
                    cfg: SimConfig | None = None,
                    reward: RewardParams | None = None) -> Dataset:
    """Collect scripted demonstration episodes on fresh terrain seeds.

    `seeds` is either a base seed (episode seeds derived from it) or an
    explicit per-episode list.
    """
    cfg = cfg or SimConfig()
    reward = reward or RewardParams()
    if isinstance(seeds, int):
        seed_list = [episode_seed(seeds, i) for i in range(n_scripted)]
        seed_meta = {"base": seeds}
    else:
        seed_list = list(seeds)[:n_scripted]
        seed_meta = {"explicit": seed_list}
        if len(seed_list) < n_scripted:
            raise ValueError(f"need {n_scripted} seeds, got {len(seed_list)}")

    trajectories = []
    for ep_seed in seed_list:
        rng = np.random.default_rng(np.random.SeedSequence([ep_seed, 7]))
        policy = make_scripted_policy(rng)
        trajectories.append(run_episode(spec, ep_seed, policy, cfg=cfg,
                                        reward=reward, source="scripted"))

    stats = _stats_for(trajectories)
    return Dataset(trajectories=trajectories, norm_stats=stats, reward=reward,
                   generation_seeds={spec.name: seed_meta})


def _stats_for(trajectories: list[Trajectory]) -> NormStats:
    if not trajectories or all(len(t) == 0 for t in trajectories):
        raise DatasetFormatError("cannot compute normalization stats: dataset is empty")
    contexts = np.concatenate([t.contexts() for t in trajectories], axis=0)
    return NormStats.from_contexts(contexts)


def merge_datasets(datasets: list[Dataset]) -> Dataset:
    """Concatenate trajectories and recompute stats over the union."""
    if not datasets:
        raise ValueError("merge_datasets needs at least one dataset")
    versions = {d.schema_version for d in datasets}
    if versions != {DATASET_SCHEMA_VERSION}:
        raise DatasetFormatError(f"schema version mismatch: {sorted(versions)}")
    rewards = {(d.reward.w1, d.reward.w2, d.reward.d_target) for d in datasets}
    if len(rewards) > 1:
        raise DatasetFormatError("cannot merge datasets with different reward params")

    trajectories = [t for d in datasets for t in d.trajectories]
    seeds: dict = {}
    for d in datasets:
        seeds.update(d.generation_seeds)
    return Dataset(trajectories=trajectories, norm_stats=_stats_for(trajectories),
                   reward=datasets[0].reward, generation_seeds=seeds)


# --- persistence ---

def _traj_record(t: Trajectory) -> dict:
    return {
        "terrain": t.terrain,
        "seed": t.seed,
        "source": t.source,
        "outcome": t.outcome,
        "max_force": t.max_force,
        "transitions": [
            {"c": [float(v) for v in tr.context],
             "a": [float(v) for v in tr.action],
             "r": tr.reward,
             "done": tr.done}
            for tr in t.transitions
        ],
    }


def save_dataset(ds: Dataset, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema_version": ds.schema_version,
        "terrains": ds.terrains,
        "norm_stats": {
            "obs_mean": [float(v) for v in ds.norm_stats.obs_mean],
            "obs_std": [float(v) for v in ds.norm_stats.obs_std],
        },
        "reward": {"w1": ds.reward.w1, "w2": ds.reward.w2,
                   "d_target": ds.reward.d_target},
        "generation_seeds": ds.generation_seeds,
        "n_trajectories": len(ds.trajectories),
    }
    (path / META_NAME).write_text(json.dumps(meta, indent=2) + "\n")
    with open(path / TRAJ_NAME, "w") as f:
        for t in ds.trajectories:
            f.write(json.dumps(_traj_record(t), separators=(",", ":")) + "\n")


def _parse_trajectory(obj: dict, index: int, terrains: set[str]) -> Trajectory:
    try:
        transitions = []
        for tr in obj["transitions"]:
            c = np.asarray(tr["c"], dtype=float)
            a = np.asarray(tr["a"], dtype=float)
            if c.shape != (CONTEXT_DIM,) or a.shape != (ACTION_DIM,):
                raise DatasetFormatError(
                    f"record {index}: context/action shape {c.shape}/{a.shape}")
            r = float(tr["r"])
            if r > 0:
                raise DatasetFormatError(f"record {index}: positive reward {r}")
            transitions.append(Transition(context=c, action=a, reward=r,
                                          done=bool(tr["done"])))
        outcome = obj["outcome"]
        if outcome not in OUTCOMES:
            raise DatasetFormatError(f"record {index}: bad outcome {outcome!r}")
        terrain = obj["terrain"]
        if terrains and terrain not in terrains:
            raise DatasetFormatError(
                f"record {index}: terrain {terrain!r} not in dataset terrain set")
        return Trajectory(terrain=terrain, seed=int(obj["seed"]),
                          transitions=transitions, outcome=outcome,
                          max_force=float(obj["max_force"]),
                          source=obj.get("source", "scripted"))
    except KeyError as e:
        raise DatasetFormatError(f"record {index}: missing field {e}") from e


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    try:
        meta = json.loads((path / META_NAME).read_text())
    except FileNotFoundError as e:
        raise DatasetFormatError(f"missing {META_NAME} in {path}") from e
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{META_NAME}: parse error at byte {e.pos}") from e

    version = meta.get("schema_version")
    if version != DATASET_SCHEMA_VERSION:
        raise DatasetFormatError(
            f"dataset schema_version {version!r} != {DATASET_SCHEMA_VERSION}")

    terrains = set(meta.get("terrains", []))
    trajectories = []
    offset = 0
    with open(path / TRAJ_NAME, "rb") as f:
        for index, raw in enumerate(f):
            try:
                obj = json.loads(raw.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as e:
                pos = getattr(e, "pos", 0)
                raise DatasetFormatError(
                    f"{TRAJ_NAME}: parse error in record {index} "
                    f"at byte {offset + pos}") from e
            trajectories.append(_parse_trajectory(obj, index, terrains))
            offset += len(raw)

    stats = NormStats(obs_mean=np.asarray(meta["norm_stats"]["obs_mean"]),
                      obs_std=np.asarray(meta["norm_stats"]["obs_std"]))
    reward = RewardParams(**meta["reward"])
    return Dataset(trajectories=trajectories, norm_stats=stats, reward=reward,
                   generation_seeds=meta.get("generation_seeds", {}),
                   schema_version=version)
