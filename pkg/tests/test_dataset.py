"""Dataset collection, normalization stats, persistence round-trips."""

import json

import numpy as np
import pytest

from digrl.dataset import (Dataset, collect_dataset, load_dataset,
                           merge_datasets, save_dataset)
from digrl.errors import DatasetFormatError
from digrl.obs import NormStats
from digrl.terrain import get_preset


@pytest.fixture(scope="module")
def small_sets():
    sand = collect_dataset(get_preset("sand"), 6, seeds=100)
    pebbles = collect_dataset(get_preset("pea_pebbles"), 6, seeds=200)
    return sand, pebbles


def test_collect_counts_and_terrain(small_sets):
    sand, _ = small_sets
    assert len(sand.trajectories) == 6
    assert sand.terrains == ["sand"]
    assert all(t.terrain == "sand" for t in sand.trajectories)
    # fresh terrain seed per episode
    assert len({t.seed for t in sand.trajectories}) == 6


def test_collect_is_deterministic(small_sets):
    sand, _ = small_sets
    again = collect_dataset(get_preset("sand"), 6, seeds=100)
    for a, b in zip(sand.trajectories, again.trajectories):
        np.testing.assert_array_equal(a.contexts(), b.contexts())
        np.testing.assert_array_equal(a.actions(), b.actions())
        assert a.outcome == b.outcome


def test_empty_collection_fails_stats():
    with pytest.raises(DatasetFormatError):
        collect_dataset(get_preset("sand"), 0, seeds=1)


def test_norm_stats_center_and_scale(small_sets):
    sand, _ = small_sets
    normalized = sand.norm_stats.normalize(sand.all_contexts())
    assert np.all(np.abs(normalized.mean(axis=0)) < 1e-6)
    assert np.all(np.abs(normalized.std(axis=0) - 1.0) < 1e-6)


def test_norm_stats_std_floor():
    stats = NormStats(obs_mean=np.zeros(9), obs_std=np.zeros(9))
    assert np.all(stats.obs_std >= 1e-6)


def test_save_load_round_trip_bit_exact(tmp_path, small_sets):
    sand, _ = small_sets
    save_dataset(sand, tmp_path / "d")
    loaded = load_dataset(tmp_path / "d")
    assert len(loaded.trajectories) == len(sand.trajectories)
    for a, b in zip(sand.trajectories, loaded.trajectories):
        np.testing.assert_array_equal(a.contexts(), b.contexts())
        np.testing.assert_array_equal(a.actions(), b.actions())
        assert a.seed == b.seed and a.outcome == b.outcome
        assert a.max_force == b.max_force
        assert [t.reward for t in a.transitions] == [t.reward for t in b.transitions]
    np.testing.assert_array_equal(loaded.norm_stats.obs_mean, sand.norm_stats.obs_mean)
    np.testing.assert_array_equal(loaded.norm_stats.obs_std, sand.norm_stats.obs_std)


def test_save_twice_is_byte_identical(tmp_path, small_sets):
    sand, _ = small_sets
    save_dataset(sand, tmp_path / "a")
    save_dataset(sand, tmp_path / "b")
    for name in ("meta.json", "trajectories.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_truncated_file_errors_with_byte_offset(tmp_path, small_sets):
    sand, _ = small_sets
    save_dataset(sand, tmp_path / "d")
    traj_file = tmp_path / "d" / "trajectories.jsonl"
    data = traj_file.read_bytes()
    traj_file.write_bytes(data[: len(data) - 40])
    with pytest.raises(DatasetFormatError, match="byte"):
        load_dataset(tmp_path / "d")


def test_version_mismatch_is_explicit(tmp_path, small_sets):
    sand, _ = small_sets
    save_dataset(sand, tmp_path / "d")
    meta_file = tmp_path / "d" / "meta.json"
    meta = json.loads(meta_file.read_text())
    meta["schema_version"] = 2
    meta_file.write_text(json.dumps(meta))
    with pytest.raises(DatasetFormatError, match="schema_version"):
        load_dataset(tmp_path / "d")


def test_merge_combines_terrains_and_counts(small_sets):
    sand, pebbles = small_sets
    merged = merge_datasets([sand, pebbles])
    assert merged.terrains == ["pea_pebbles", "sand"]
    assert len(merged.trajectories) == 12
    assert merged.n_transitions() == sand.n_transitions() + pebbles.n_transitions()


def test_merge_order_does_not_change_stats(small_sets):
    sand, pebbles = small_sets
    m1 = merge_datasets([sand, pebbles])
    m2 = merge_datasets([pebbles, sand])
    np.testing.assert_array_equal(m1.norm_stats.obs_mean, m2.norm_stats.obs_mean)
    np.testing.assert_array_equal(m1.norm_stats.obs_std, m2.norm_stats.obs_std)


def test_merge_single_dataset_keeps_trajectories(small_sets):
    sand, _ = small_sets
    merged = merge_datasets([sand])
    assert len(merged.trajectories) == len(sand.trajectories)
    np.testing.assert_allclose(merged.norm_stats.obs_mean, sand.norm_stats.obs_mean)
