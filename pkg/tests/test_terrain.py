"""Terrain generation: determinism, blockage statistics, preset config."""

import json

import numpy as np
import pytest

from digrl.errors import ConfigurationError
from digrl.terrain import (TERRAIN_NAMES, TerrainSpec, get_preset, load_presets,
                           make_terrain)


def custom_spec(**overrides):
    base = dict(name="custom", cell_width=0.01, layer_depth=0.005,
                block_prob=0.2, block_force_scale=100.0, base_stiffness=300.0,
                friction_coeff=0.3, agitation_sweep=0.5, agitation_rotate=0.6)
    base.update(overrides)
    return TerrainSpec(**base)


def test_all_presets_load_and_validate():
    presets = load_presets()
    assert set(TERRAIN_NAMES) <= set(presets)
    for spec in presets.values():
        spec.validate()


def test_zero_block_prob_gives_empty_grid():
    grid = make_terrain(custom_spec(block_prob=0.0), seed=7)
    assert np.all(grid.blockage == 0.0)


def test_same_seed_gives_identical_grids():
    spec = get_preset("fragmented_rocks")
    g1 = make_terrain(spec, 42)
    g2 = make_terrain(spec, 42)
    np.testing.assert_array_equal(g1.blockage, g2.blockage)
    np.testing.assert_array_equal(g1.surface_height, g2.surface_height)


def test_different_seeds_differ():
    spec = get_preset("fragmented_rocks")
    assert not np.array_equal(make_terrain(spec, 1).blockage,
                              make_terrain(spec, 2).blockage)


def test_blocker_fraction_matches_block_prob():
    # 100 x 100 = 1e4 cell-layers at p=0.5: fraction of blockage > 0.5
    # should land within 0.5 +/- 0.02.
    spec = custom_spec(block_prob=0.5)
    grid = make_terrain(spec, 42, extent_x=1.0, extent_z=0.5)
    assert grid.blockage.size == 10_000
    frac = float((grid.blockage > 0.5).mean())
    assert 0.48 <= frac <= 0.52


@pytest.mark.parametrize("p", [0.05, 0.25, 0.45, 0.75])
def test_blocker_fraction_across_probabilities(p):
    spec = custom_spec(block_prob=p)
    grid = make_terrain(spec, 11, extent_x=1.0, extent_z=0.5)
    frac = float((grid.blockage > 0.5).mean())
    assert abs(frac - p) < 0.025


def test_blockage_always_in_unit_interval():
    for seed in range(5):
        grid = make_terrain(get_preset("wood_blocks"), seed)
        assert np.all(grid.blockage >= 0.0)
        assert np.all(grid.blockage <= 1.0)


def test_invalid_spec_rejected():
    with pytest.raises(ConfigurationError):
        make_terrain(custom_spec(block_prob=1.5), 0)
    with pytest.raises(ConfigurationError):
        make_terrain(custom_spec(agitation_sweep=1.0), 0)
    with pytest.raises(ConfigurationError):
        make_terrain(custom_spec(base_stiffness=0.0), 0)


def test_unknown_preset_rejected():
    with pytest.raises(ConfigurationError):
        get_preset("granite")


def test_preset_schema_version_checked(tmp_path):
    bad = {"schema_version": 99, "presets": {}}
    p = tmp_path / "terrains.json"
    p.write_text(json.dumps(bad))
    with pytest.raises(ConfigurationError):
        load_presets(p)


def test_preset_ordering_easiest_to_hardest():
    presets = load_presets()
    probs = [presets[n].block_prob for n in TERRAIN_NAMES]
    assert probs == sorted(probs) or all(
        presets["sand"].block_prob <= presets[n].block_prob for n in TERRAIN_NAMES)
    assert presets["sand"].block_force_scale < presets["fragmented_rocks"].block_force_scale
