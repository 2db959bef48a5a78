"""Surrogate bucket-terrain contact plant stepped at 1 ms.

Force model, per inner step:
  * vertical reading while pressing down = contact preload + depth-proportional
    term + blockage spike; the spike ramps at a fixed rate toward
    blockage * block_force_scale for the cell-layer under the teeth and decays
    when the push stops or the teeth move to another cell-layer.
  * lateral reading while sweeping = friction proportional to the vertical
    load + a frontal blockage spike against the cell being entered, capped at
    the surface-drag level (teeth ride over surface fragments rather than
    pushing through them).
  * pitch moment while rotating = the tip's lateral resistance (friction +
    churn spike against the current cell-layer, same surface-drag cap) through
    a fixed lever arm.
  * at rest every reading relaxes toward zero.

Mobility: commanded velocity per axis is scaled down only by that axis'
blockage spike; the smooth terms (preload, stiffness, friction) register on
the sensor but do not impede the slow-moving bucket, which keeps the three
primitive axes kinematically independent on blockage-free terrain. Upward
motion is the exception: overburden collapse and suction grow with depth and
slow extraction without registering on the sensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericError, SamplingError, StateError
from .terrain import TerrainGrid

# Fixed bucket geometry: tooth attack angle at contact, tip-to-pitch-axis lever.
ATTACK_PITCH = -0.45  # rad
PITCH_LEVER = 0.15  # m

# Rotation agitation reference: one full erosion factor per 0.1 rad swept.
ROTATION_AGITATION_REF = 0.1  # rad

# Contact sampling region half-width (1D reduction of the 10cm x 15cm patch).
CONTACT_REGION_HALF_WIDTH = 0.075  # m

_PROBE_DZ = 0.00025  # m, probe scan resolution for initial contact


@dataclass(frozen=True)
class SimConfig:
    """Inner-controller constants shared by every terrain."""

    dt_inner: float = 1e-3  # s
    halt_force: float = 90.0  # N (N*m for the moment channel)
    stall_force: float = 110.0  # N, mobility ceiling and reading cap
    contact_start_force: float = 3.0  # N, controller contact-detection preload
    spike_ramp_rate: float = 2.0  # N per inner step
    lift_release_fraction: float = 0.5
    lift_speed: float = 0.02  # m/s commanded while the penetrate limit is active
    # Lateral/rotation spikes cap here: surface dragging engages fragments
    # shallowly, so sweeping can always pass (and erode) a blocked cell.
    surface_drag_cap: float = 55.0  # N
    # Extraction drag profile: upward mobility = 1 - (depth/extraction_depth)^exponent,
    # floored so a buried bucket can still crawl out.
    extraction_depth: float = 0.016  # m
    extraction_exponent: float = 0.5
    extraction_floor: float = 0.05
    # Workspace ceiling above the surface: the penetration phase keeps the
    # bucket engaged with the terrain.
    hover_limit: float = 0.002  # m

    def validate(self) -> None:
        from .errors import ConfigurationError
        if not (self.contact_start_force < self.halt_force < self.stall_force):
            raise ConfigurationError(
                "require contact_start_force < halt_force < stall_force, got "
                f"{self.contact_start_force}, {self.halt_force}, {self.stall_force}")
        if self.dt_inner <= 0 or self.spike_ramp_rate <= 0:
            raise ConfigurationError("dt_inner and spike_ramp_rate must be > 0")


@dataclass(frozen=True)
class BucketState:
    """Bucket pose and achieved velocities; halted is absorbing until reset."""

    x: float
    z: float
    pitch: float
    vx: float = 0.0
    vz: float = 0.0
    vpitch: float = 0.0
    halted: bool = False


@dataclass(frozen=True)
class ContactReading:
    fx: float
    fz: float
    mpitch: float

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fz, self.mpitch])

    def norm_sq(self) -> float:
        return self.fx * self.fx + self.fz * self.fz + self.mpitch * self.mpitch

    def max_component(self) -> float:
        return max(abs(self.fx), abs(self.fz), abs(self.mpitch))


@dataclass(frozen=True)
class HaltEvent:
    """Controller halt: a force component reached the halt threshold."""

    component: str
    value: float


def depth_of(bucket: BucketState, grid: TerrainGrid) -> float:
    """Teeth depth below the initial surface at the bucket's lateral cell, clamped at 0."""
    surface = float(grid.initial_surface[grid.cell_index(bucket.x)])
    return max(0.0, surface - bucket.z)


def probe_resistance(grid: TerrainGrid, x: float, depth: float, cfg: SimConfig) -> float:
    """Quasi-static resistance at a pose: preload + depth term, no dynamic spikes."""
    if depth < 0.0:
        return 0.0
    return min(cfg.contact_start_force + grid.spec.base_stiffness * depth,
               cfg.stall_force)


def sample_initial_contact(grid: TerrainGrid, rng: np.random.Generator,
                           cfg: SimConfig | None = None) -> BucketState:
    """Place the bucket at a random lateral offset, lowered until the
    quasi-static resistance reaches the contact-start threshold."""
    cfg = cfg or SimConfig()
    center = 0.5 * (grid.x_min + grid.x_max)
    offset = float(rng.uniform(-CONTACT_REGION_HALF_WIDTH, CONTACT_REGION_HALF_WIDTH))
    x = center + offset
    if not (grid.x_min <= x <= grid.x_max):
        raise SamplingError(
            f"contact offset {offset:+.4f} m falls outside the grid extent")

    surface = float(grid.initial_surface[grid.cell_index(x)])
    max_depth = grid.n_layers * grid.spec.layer_depth
    depth = 0.0
    while probe_resistance(grid, x, depth, cfg) < cfg.contact_start_force:
        depth += _PROBE_DZ
        if depth > max_depth:
            raise SamplingError(
                f"no contact above {cfg.contact_start_force} N within the grid depth")
    return BucketState(x=x, z=surface - depth, pitch=ATTACK_PITCH)


def _extraction_scale(depth: float, cfg: SimConfig) -> float:
    if depth <= 0.0:
        return 1.0
    drag = (depth / cfg.extraction_depth) ** cfg.extraction_exponent
    return max(cfg.extraction_floor, 1.0 - drag)


def sim_step(grid: TerrainGrid, bucket: BucketState,
             v_cmd: tuple[float, float, float],
             cfg: SimConfig) -> tuple[BucketState, ContactReading, HaltEvent | None]:
    """Advance one 1 ms inner step. Mutates grid blockage (agitation) and
    the grid's contact transients; returns the new bucket state and reading."""
    if bucket.halted:
        raise StateError("sim_step on a halted bucket")
    vx_c, vz_c, vp_c = v_cmd
    if not (math.isfinite(vx_c) and math.isfinite(vz_c) and math.isfinite(vp_c)):
        raise NumericError(f"non-finite velocity command {v_cmd}")

    spec = grid.spec
    st = grid.contact
    blockage = grid.blockage
    ramp = cfg.spike_ramp_rate

    cell = grid.cell_index(bucket.x)
    surface = float(grid.initial_surface[cell])
    depth = surface - bucket.z
    in_contact = depth >= 0.0
    layer = grid.layer_index(depth) if in_contact else 0

    # Spikes are tied to one cell-layer; moving on releases the old one.
    if in_contact and st.active != (cell, layer):
        st.spike_z = 0.0
        st.active = (cell, layer)

    # --- vertical channel (penetrate) ---
    pushing_down = in_contact and vz_c < 0.0
    if pushing_down:
        cap = float(blockage[cell, layer]) * spec.block_force_scale
        st.spike_z = min(st.spike_z + ramp, cap, cfg.stall_force)
    else:
        st.spike_z = max(0.0, st.spike_z - ramp)

    # Static embedment load: the smooth part of the vertical resistance.
    # Friction on the other channels works against this, not against the
    # transient blocker spike, so direction reversals can always relieve a
    # lateral force-limit crossing.
    static_load = (cfg.contact_start_force + spec.base_stiffness * max(depth, 0.0)
                   if in_contact else 0.0)

    if not in_contact:
        fz = 0.0
    elif pushing_down:
        fz = min(static_load + st.spike_z, cfg.stall_force)
    else:
        fz = st.spike_z

    # --- lateral channel (sweep) ---
    if in_contact and vx_c != 0.0:
        direction = 1 if vx_c > 0.0 else -1
        if direction != st.lat_dir:
            st.spike_lat = 0.0
            st.lat_dir = direction
        front = cell + direction
        if 0 <= front < grid.n_cells:
            b_front = float(blockage[front, layer])
        else:
            b_front = 1.0  # tray wall
        cap = min(b_front * spec.block_force_scale, cfg.surface_drag_cap)
        st.spike_lat = min(st.spike_lat + ramp, cap)
        fx = -direction * min(spec.friction_coeff * static_load + st.spike_lat,
                              cfg.stall_force)
    else:
        st.spike_lat = max(0.0, st.spike_lat - ramp)
        fx = 0.0

    # --- rotation channel (rotate): tip churns the current cell-layer ---
    if in_contact and vp_c != 0.0:
        direction_r = 1 if vp_c > 0.0 else -1
        if direction_r != st.rot_dir:
            st.spike_rot = 0.0
            st.rot_dir = direction_r
        cap = min(float(blockage[cell, layer]) * spec.block_force_scale,
                  cfg.surface_drag_cap)
        st.spike_rot = min(st.spike_rot + ramp, cap)
        f_rot = min(spec.friction_coeff * static_load + st.spike_rot, cfg.stall_force)
        mpitch = -direction_r * PITCH_LEVER * f_rot
    else:
        st.spike_rot = max(0.0, st.spike_rot - ramp)
        mpitch = 0.0

    reading = ContactReading(fx=fx, fz=fz, mpitch=mpitch)

    # Controller halt check precedes motion: the halting step does not move.
    for name, value in (("fx", fx), ("fz", fz), ("mpitch", mpitch)):
        if abs(value) >= cfg.halt_force:
            halted = replace(bucket, vx=0.0, vz=0.0, vpitch=0.0, halted=True)
            return halted, reading, HaltEvent(component=name, value=value)

    # --- mobility: blockage spikes impede, smooth terms do not ---
    if vz_c < 0.0:
        scale_z = max(0.0, 1.0 - st.spike_z / cfg.stall_force)
    elif vz_c > 0.0 and in_contact:
        scale_z = _extraction_scale(depth, cfg)
    else:
        scale_z = 1.0
    scale_x = max(0.0, 1.0 - st.spike_lat / cfg.stall_force) if in_contact else 1.0
    scale_p = max(0.0, 1.0 - st.spike_rot / cfg.stall_force) if in_contact else 1.0

    vx_a = vx_c * scale_x
    vz_a = vz_c * scale_z
    vp_a = vp_c * scale_p

    dt = cfg.dt_inner
    x_new = min(max(bucket.x + vx_a * dt, grid.x_min), grid.x_max)
    z_floor = surface - grid.n_layers * spec.layer_depth
    z_new = min(max(bucket.z + vz_a * dt, z_floor), surface + cfg.hover_limit)
    pitch_new = bucket.pitch + vp_a * dt

    # --- agitation (never increases blockage) ---
    if in_contact:
        cell_new = grid.cell_index(x_new)
        if cell_new != cell:
            blockage[cell_new, layer] *= spec.agitation_sweep
        if vp_a != 0.0:
            swept = abs(vp_a) * dt / ROTATION_AGITATION_REF
            blockage[cell, layer] *= spec.agitation_rotate ** swept

    new_bucket = BucketState(x=x_new, z=z_new, pitch=pitch_new,
                             vx=vx_a, vz=vz_a, vpitch=vp_a, halted=False)
    return new_bucket, reading, None
