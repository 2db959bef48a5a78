"""Three parameterized manipulation primitives executed over one 100 ms agent step.

sweep drives lateral motion and reverses direction on a force or displacement
limit; rotate drives pitch motion and reverses on a moment or angle limit;
penetrate drives vertical motion and lifts the bucket while its force limit is
exceeded, releasing at a fraction of the limit. All three run simultaneously
on their own axes, checked at every 1 ms inner step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import StateError
from .sim import BucketState, ContactReading, HaltEvent, SimConfig, depth_of, sim_step
from .terrain import TerrainGrid

INNER_STEPS_PER_ACTION = 100  # 10 Hz agent rate over a 1000 Hz plant

ACTION_DIM = 8

# (low, high) per action component, in action-vector order.
PARAM_RANGES = (
    ("v_x", -0.1, 0.1),
    ("f_lim_x", 25.0, 40.0),
    ("d_lim_x", 0.015, 0.03),
    ("w_pitch", -0.5, 0.5),
    ("m_lim_pitch", 40.0, 70.0),
    ("a_lim_pitch", 0.1, 0.2),
    ("v_z", -0.03, 0.03),
    ("f_lim_z", 40.0, 70.0),
)


@dataclass(frozen=True)
class PrimitiveParams:
    v_x: float
    f_lim_x: float
    d_lim_x: float
    w_pitch: float
    m_lim_pitch: float
    a_lim_pitch: float
    v_z: float
    f_lim_z: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name, _, _ in PARAM_RANGES])


@dataclass(frozen=True)
class NormalizedAction:
    """8-vector in [-1, 1]^8; construction clamps."""

    a: np.ndarray

    def __post_init__(self):
        arr = np.clip(np.asarray(self.a, dtype=float), -1.0, 1.0)
        object.__setattr__(self, "a", arr)
        if arr.shape != (ACTION_DIM,):
            raise ValueError(f"action must have shape ({ACTION_DIM},), got {arr.shape}")


def denormalize_action(action: NormalizedAction) -> PrimitiveParams:
    """Affine map from [-1, 1] to each parameter's physical range."""
    values = {}
    for u, (name, lo, hi) in zip(action.a, PARAM_RANGES):
        values[name] = lo + 0.5 * (float(u) + 1.0) * (hi - lo)
    return PrimitiveParams(**values)


def normalize_action(params: PrimitiveParams) -> tuple[NormalizedAction, bool]:
    """Inverse affine map; out-of-range fields are clamped and flagged."""
    comps = []
    clamped = False
    for name, lo, hi in PARAM_RANGES:
        v = getattr(params, name)
        u = 2.0 * (v - lo) / (hi - lo) - 1.0
        if u < -1.0 or u > 1.0:
            clamped = True
            u = min(max(u, -1.0), 1.0)
        comps.append(u)
    return NormalizedAction(a=np.array(comps)), clamped


@dataclass
class LimitState:
    """Reversal bookkeeping threaded across agent steps within one episode."""

    sweep_dir: int = 1
    sweep_accum: float = 0.0
    rotate_dir: int = 1
    rotate_accum: float = 0.0
    lifting: bool = False


@dataclass(frozen=True)
class StepSummary:
    """Per-agent-step aggregate over the executed inner steps."""

    mean_force: np.ndarray  # (3,) signed mean of (fx, fz, mpitch)
    max_abs_force: np.ndarray  # (3,) componentwise max magnitude
    mean_velocity: np.ndarray  # (3,) displacement / elapsed time
    end_depth: float
    halted: bool
    halt_event: HaltEvent | None
    n_inner: int

    @property
    def duration(self) -> float:
        return self.n_inner * 1e-3

    @property
    def max_component_force(self) -> float:
        return float(np.max(self.max_abs_force))


def _summarize(readings: list[ContactReading], start: BucketState,
               end: BucketState, grid: TerrainGrid, dt: float,
               halt: HaltEvent | None) -> StepSummary:
    n = len(readings)
    arr = np.array([[r.fx, r.fz, r.mpitch] for r in readings])
    elapsed = n * dt
    disp = np.array([end.x - start.x, end.z - start.z, end.pitch - start.pitch])
    return StepSummary(
        mean_force=arr.mean(axis=0),
        max_abs_force=np.abs(arr).max(axis=0),
        mean_velocity=disp / elapsed,
        end_depth=depth_of(end, grid),
        halted=halt is not None,
        halt_event=halt,
        n_inner=n,
    )


def execute_step(params: PrimitiveParams, bucket: BucketState, grid: TerrainGrid,
                 limits: LimitState, cfg: SimConfig
                 ) -> tuple[BucketState, LimitState, StepSummary]:
    """Run one agent step: 100 inner plant steps under the primitives' limit logic."""
    if bucket.halted:
        raise StateError("execute_step on a halted bucket")
    limits = replace_limits(limits)
    start = bucket
    readings: list[ContactReading] = []
    halt: HaltEvent | None = None

    speed_x = abs(params.v_x)
    speed_p = abs(params.w_pitch)
    lift_exit = cfg.lift_release_fraction * params.f_lim_z

    for _ in range(INNER_STEPS_PER_ACTION):
        vz_cmd = cfg.lift_speed if limits.lifting else params.v_z
        v_cmd = (limits.sweep_dir * speed_x, vz_cmd, limits.rotate_dir * speed_p)
        prev = bucket
        bucket, reading, halt = sim_step(grid, bucket, v_cmd, cfg)
        readings.append(reading)
        if halt is not None:
            break

        limits.sweep_accum += abs(bucket.x - prev.x)
        limits.rotate_accum += abs(bucket.pitch - prev.pitch)
        if abs(reading.fx) > params.f_lim_x or limits.sweep_accum > params.d_lim_x:
            limits.sweep_dir = -limits.sweep_dir
            limits.sweep_accum = 0.0
        if abs(reading.mpitch) > params.m_lim_pitch or limits.rotate_accum > params.a_lim_pitch:
            limits.rotate_dir = -limits.rotate_dir
            limits.rotate_accum = 0.0
        if limits.lifting:
            if abs(reading.fz) < lift_exit:
                limits.lifting = False
        elif abs(reading.fz) > params.f_lim_z:
            limits.lifting = True

    return bucket, limits, _summarize(readings, start, bucket, grid, cfg.dt_inner, halt)


def replace_limits(limits: LimitState) -> LimitState:
    return LimitState(sweep_dir=limits.sweep_dir, sweep_accum=limits.sweep_accum,
                      rotate_dir=limits.rotate_dir, rotate_accum=limits.rotate_accum,
                      lifting=limits.lifting)


BASELINE_DESCENT_SPEED = -0.02  # m/s


def vertical_baseline_step(bucket: BucketState, grid: TerrainGrid,
                           cfg: SimConfig) -> tuple[BucketState, StepSummary]:
    """Fixed vertically-downward trajectory: no limit logic, halts on halt_force."""
    if bucket.halted:
        raise StateError("vertical_baseline_step on a halted bucket")
    start = bucket
    readings: list[ContactReading] = []
    halt: HaltEvent | None = None
    for _ in range(INNER_STEPS_PER_ACTION):
        bucket, reading, halt = sim_step(grid, bucket, (0.0, BASELINE_DESCENT_SPEED, 0.0), cfg)
        readings.append(reading)
        if halt is not None:
            break
    return bucket, _summarize(readings, start, bucket, grid, cfg.dt_inner, halt)
