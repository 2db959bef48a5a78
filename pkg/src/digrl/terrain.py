"""Layered-blockage terrain: preset specs, seeded grid generation, agitation bookkeeping.

A terrain is a 2D cross-section: lateral cells x depth layers, each cell-layer
holding a blockage scalar in [0, 1] that represents interlocked rigid fragments.
Blockage is the sole source of force spikes and jamming; lateral sweeping and
pitch rotation erode it multiplicatively and never increase it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

TERRAIN_NAMES = (
    "sand",
    "pea_pebbles",
    "marble_chips",
    "red_mulch",
    "wood_blocks",
    "fragmented_rocks",
)

# Rigid presets used by the jamming-separation checks (hardest three).
RIGID_PRESETS = ("marble_chips", "wood_blocks", "fragmented_rocks")

GRID_EXTENT_X = 0.4  # m, lateral span of the tray cross-section
GRID_EXTENT_Z = 0.12  # m, modeled material depth

TERRAINS_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TerrainSpec:
    """Physical parameters of one terrain preset."""

    name: str
    cell_width: float  # m, lateral discretization
    layer_depth: float  # m, vertical discretization
    block_prob: float  # expected fraction of cell-layers with blockage > 0.5
    block_force_scale: float  # N, peak resistance of a full (b=1) blocker
    base_stiffness: float  # N/m, depth-proportional resistance coefficient
    friction_coeff: float  # lateral friction per unit normal load
    agitation_sweep: float  # multiplicative blockage reduction per sweep pass
    agitation_rotate: float  # multiplicative reduction per 0.1 rad of rotation

    def validate(self) -> None:
        if not (0.0 <= self.block_prob <= 1.0):
            raise ConfigurationError(f"block_prob must be in [0,1], got {self.block_prob}")
        for name in ("agitation_sweep", "agitation_rotate"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ConfigurationError(f"{name} must be in (0,1), got {v}")
        for name in ("cell_width", "layer_depth", "block_force_scale",
                     "base_stiffness", "friction_coeff"):
            v = getattr(self, name)
            if not v > 0.0:
                raise ConfigurationError(f"{name} must be > 0, got {v}")


@dataclass
class _ContactTransients:
    """Episode-scoped plant state: force spikes build and decay against
    specific cell-layers; moving to a new cell-layer releases the old spike."""

    spike_z: float = 0.0
    spike_lat: float = 0.0
    spike_rot: float = 0.0
    lat_dir: int = 0
    rot_dir: int = 0
    active: tuple[int, int] | None = None


@dataclass
class TerrainGrid:
    """Seeded blockage field plus per-episode contact transients.

    The grid is fully determined by (spec, seed) at construction. Agitation
    mutates `blockage` in place during an episode, so a grid must be confined
    to a single episode runner.
    """

    spec: TerrainSpec
    seed: int
    blockage: np.ndarray  # (n_cells, n_layers), values in [0, 1]
    surface_height: np.ndarray  # (n_cells,), m
    initial_surface: np.ndarray  # frozen copy for depth reference
    contact: _ContactTransients = field(default_factory=_ContactTransients)

    @property
    def n_cells(self) -> int:
        return self.blockage.shape[0]

    @property
    def n_layers(self) -> int:
        return self.blockage.shape[1]

    @property
    def x_min(self) -> float:
        return -0.5 * self.n_cells * self.spec.cell_width

    @property
    def x_max(self) -> float:
        return 0.5 * self.n_cells * self.spec.cell_width

    def cell_index(self, x: float) -> int:
        i = int((x - self.x_min) / self.spec.cell_width)
        return min(max(i, 0), self.n_cells - 1)

    def layer_index(self, depth: float) -> int:
        j = int(depth / self.spec.layer_depth)
        return min(max(j, 0), self.n_layers - 1)


def make_terrain(spec: TerrainSpec, seed: int,
                 extent_x: float = GRID_EXTENT_X,
                 extent_z: float = GRID_EXTENT_Z) -> TerrainGrid:
    """Generate the seeded blockage field for one episode.

    Blockage is drawn so that the expected fraction of cell-layers with
    blockage > 0.5 equals block_prob: for p <= 0.5 a cell-layer is occupied
    with probability 2p and its magnitude is uniform on (0, 1); for p > 0.5
    every cell-layer is occupied with magnitude uniform on (1 - 0.5/p, 1).
    """
    spec.validate()
    n_cells = int(round(extent_x / spec.cell_width))
    n_layers = int(round(extent_z / spec.layer_depth))
    if n_cells < 3 or n_layers < 2:
        raise ConfigurationError(
            f"grid too small: {n_cells} cells x {n_layers} layers")

    rng = np.random.default_rng(seed)
    occupancy = rng.uniform(size=(n_cells, n_layers))
    magnitude = rng.uniform(size=(n_cells, n_layers))
    p = spec.block_prob
    if p <= 0.5:
        blockage = np.where(occupancy < 2.0 * p, magnitude, 0.0)
    else:
        lo = 1.0 - 0.5 / p
        blockage = lo + (1.0 - lo) * magnitude

    surface = np.zeros(n_cells)
    return TerrainGrid(
        spec=spec,
        seed=seed,
        blockage=blockage,
        surface_height=surface,
        initial_surface=surface.copy(),
    )


def _spec_from_dict(name: str, fields: dict) -> TerrainSpec:
    try:
        spec = TerrainSpec(
            name=name,
            cell_width=float(fields["cell_width"]),
            layer_depth=float(fields["layer_depth"]),
            block_prob=float(fields["block_prob"]),
            block_force_scale=float(fields["block_force_scale"]),
            base_stiffness=float(fields["base_stiffness"]),
            friction_coeff=float(fields["friction_coeff"]),
            agitation_sweep=float(fields["agitation_sweep"]),
            agitation_rotate=float(fields["agitation_rotate"]),
        )
    except KeyError as e:
        raise ConfigurationError(f"terrain preset {name!r} missing field {e}") from e
    spec.validate()
    return spec


def load_presets(path: str | Path | None = None) -> dict[str, TerrainSpec]:
    """Load terrain presets from a JSON config (package default if no path)."""
    if path is None:
        text = resources.files("digrl").joinpath("terrains.json").read_text()
    else:
        text = Path(path).read_text()
    data = json.loads(text)
    version = data.get("schema_version")
    if version != TERRAINS_SCHEMA_VERSION:
        raise ConfigurationError(
            f"terrains config schema_version {version!r} != {TERRAINS_SCHEMA_VERSION}")
    return {name: _spec_from_dict(name, fields)
            for name, fields in data["presets"].items()}


def get_preset(name: str, path: str | Path | None = None) -> TerrainSpec:
    presets = load_presets(path)
    if name not in presets:
        raise ConfigurationError(
            f"unknown terrain {name!r}; available: {sorted(presets)}")
    return presets[name]
