"""Episode protocol: reward, scripted demonstrations, and the 10 Hz agent loop."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, StateError
from .obs import CONTEXT_DIM, NormStats, Observation, assemble_observation
from .primitives import (ACTION_DIM, LimitState, NormalizedAction, StepSummary,
                         denormalize_action, execute_step, vertical_baseline_step)
from .sim import BucketState, ContactReading, SimConfig, sample_initial_contact
from .terrain import TerrainGrid, TerrainSpec, make_terrain

MAX_AGENT_STEPS = 150  # ~15 s cap, about twice a typical demonstration length
AGENT_DT = 0.1  # s

OUTCOMES = ("success", "jam", "timeout")

# Tiny slack so exact-kinematics descents (k steps of v*dt) count as reaching
# the target despite accumulated float rounding.
_DEPTH_EPS = 1e-9


@dataclass(frozen=True)
class RewardParams:
    w1: float = 400.0
    w2: float = 0.0004
    d_target: float = 0.05  # m

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or self.d_target <= 0:
            raise ConfigurationError("require w1, w2 >= 0 and d_target > 0")


def compute_reward(depth: float, force: ContactReading, rp: RewardParams) -> float:
    """Penalize distance-to-target depth and squared contact force magnitude;
    depth is clamped at the target so overshoot is not rewarded."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    gap = rp.d_target - min(depth, rp.d_target)
    return -rp.w1 * gap * gap - rp.w2 * force.norm_sq()


@dataclass(frozen=True)
class Transition:
    """One (s, a, r, s') record. `context` is the post-step 9-dim context; the
    step's observation is rebuilt from the previous transition's context (zeros
    for the first step) plus frozen encoder outputs."""

    context: np.ndarray  # (9,)
    action: np.ndarray  # (8,) normalized
    reward: float
    done: bool


@dataclass
class Trajectory:
    terrain: str
    seed: int
    transitions: list[Transition]
    outcome: str
    max_force: float
    source: str = "scripted"

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}, got {self.outcome}")

    def __len__(self) -> int:
        return len(self.transitions)

    def reward_sum(self) -> float:
        return float(sum(t.reward for t in self.transitions))

    def contexts(self) -> np.ndarray:
        return np.array([t.context for t in self.transitions])

    def actions(self) -> np.ndarray:
        return np.array([t.action for t in self.transitions])


Policy = Callable[[Observation], NormalizedAction]
ObsBuilder = Callable[[np.ndarray, list[np.ndarray]], Observation]


def zero_latent_obs_builder(stats: NormStats | None = None) -> ObsBuilder:
    """Observation builder used during raw collection, before encoders exist."""
    stats = stats or NormStats.identity()
    zeros = np.zeros(8)

    def build(c_prev: np.ndarray, prefix: list[np.ndarray]) -> Observation:
        return assemble_observation(c_prev, zeros, zeros, stats)

    return build


def scripted_policy(rng: np.random.Generator) -> NormalizedAction:
    """Demonstration generator: all 8 components i.i.d. uniform on [-1, 1]."""
    return NormalizedAction(rng.uniform(-1.0, 1.0, size=ACTION_DIM))


def make_scripted_policy(rng: np.random.Generator) -> Policy:
    return lambda obs: scripted_policy(rng)


def episode_grid(spec: TerrainSpec, seed: int) -> TerrainGrid:
    return make_terrain(spec, seed)


def initial_bucket(grid: TerrainGrid, seed: int, cfg: SimConfig) -> BucketState:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    return sample_initial_contact(grid, rng, cfg)


class EpisodeRunner:
    """Stepping engine shared by the batch runner and the teleop service, so
    a recorded teleop session is bit-identical to the offline episode with
    the same seed and actions."""

    def __init__(self, spec: TerrainSpec, seed: int,
                 cfg: SimConfig | None = None,
                 reward: RewardParams | None = None,
                 max_steps: int = MAX_AGENT_STEPS,
                 source: str = "scripted"):
        self.spec = spec
        self.seed = seed
        self.cfg = cfg or SimConfig()
        self.reward_params = reward or RewardParams()
        self.max_steps = max_steps
        self.source = source
        self.grid = episode_grid(spec, seed)
        self.bucket = initial_bucket(self.grid, seed, self.cfg)
        self._origin = (self.bucket.x, self.bucket.z, self.bucket.pitch)
        self.limits = LimitState()
        self.contexts: list[np.ndarray] = []
        self.transitions: list[Transition] = []
        self.prev_context = np.zeros(CONTEXT_DIM)
        self.outcome: str | None = None
        self.max_force = 0.0
        self.reward_sum = 0.0
        self.last_summary: StepSummary | None = None

    @property
    def done(self) -> bool:
        return self.outcome is not None

    @property
    def steps(self) -> int:
        return len(self.transitions)

    def depth(self) -> float:
        from .sim import depth_of
        return depth_of(self.bucket, self.grid)

    def step(self, action: NormalizedAction) -> Transition:
        if self.done:
            raise StateError("episode already finished")
        params = denormalize_action(action)
        self.bucket, self.limits, summary = execute_step(
            params, self.bucket, self.grid, self.limits, self.cfg)
        # The engine consumes direction * |v| for sweep and rotate, so the
        # sign of those two components is semantically void. Record the
        # canonical representative: regression targets would otherwise cancel
        # toward zero agitation across sign-symmetric demonstrations.
        recorded = action.a.copy()
        recorded[0] = abs(recorded[0])
        recorded[3] = abs(recorded[3])
        x0, z0, p0 = self._origin
        c = _step_context(self.bucket, x0, z0, p0, summary)
        r = compute_reward(summary.end_depth,
                           ContactReading(*summary.mean_force),
                           self.reward_params)
        self.max_force = max(self.max_force, summary.max_component_force)
        self.reward_sum += r

        done = False
        if summary.halted:
            self.outcome, done = "jam", True
        elif summary.end_depth >= self.reward_params.d_target - _DEPTH_EPS:
            self.outcome, done = "success", True
        elif self.steps + 1 >= self.max_steps:
            self.outcome = "timeout"

        transition = Transition(context=c, action=recorded,
                                reward=r, done=done)
        self.transitions.append(transition)
        self.contexts.append(c)
        self.prev_context = c
        self.last_summary = summary
        return transition

    def trajectory(self) -> Trajectory:
        if not self.done:
            raise StateError("episode still running")
        return Trajectory(terrain=self.spec.name, seed=self.seed,
                          transitions=self.transitions, outcome=self.outcome,
                          max_force=self.max_force, source=self.source)


def run_episode(spec: TerrainSpec, seed: int, policy: Policy,
                cfg: SimConfig | None = None,
                reward: RewardParams | None = None,
                obs_builder: ObsBuilder | None = None,
                max_steps: int = MAX_AGENT_STEPS,
                source: str = "scripted") -> Trajectory:
    """Run one penetration episode: contact start, then agent steps until the
    target depth (success), a controller halt (jam), or the step cap (timeout)."""
    obs_builder = obs_builder or zero_latent_obs_builder()
    runner = EpisodeRunner(spec, seed, cfg=cfg, reward=reward,
                           max_steps=max_steps, source=source)
    while not runner.done:
        obs = obs_builder(runner.prev_context, runner.contexts)
        runner.step(policy(obs))
    return runner.trajectory()


def run_baseline_episode(spec: TerrainSpec, seed: int,
                         cfg: SimConfig | None = None,
                         reward: RewardParams | None = None,
                         max_steps: int = MAX_AGENT_STEPS) -> Trajectory:
    """Vertical-downward reference trajectory (no primitives, no limit logic)."""
    cfg = cfg or SimConfig()
    reward = reward or RewardParams()
    grid = episode_grid(spec, seed)
    bucket = initial_bucket(grid, seed, cfg)
    x0, z0, p0 = bucket.x, bucket.z, bucket.pitch

    transitions: list[Transition] = []
    outcome = "timeout"
    max_force = 0.0
    for _ in range(max_steps):
        bucket, summary = vertical_baseline_step(bucket, grid, cfg)
        c = _step_context(bucket, x0, z0, p0, summary)
        r = compute_reward(summary.end_depth,
                           ContactReading(*summary.mean_force), reward)
        max_force = max(max_force, summary.max_component_force)
        done = False
        if summary.halted:
            outcome, done = "jam", True
        elif summary.end_depth >= reward.d_target - _DEPTH_EPS:
            outcome, done = "success", True
        transitions.append(Transition(context=c, action=np.zeros(ACTION_DIM),
                                      reward=r, done=done))
        if done:
            break
    return Trajectory(terrain=spec.name, seed=seed, transitions=transitions,
                      outcome=outcome, max_force=max_force, source="baseline")


def _step_context(bucket: BucketState, x0: float, z0: float, p0: float,
                  summary: StepSummary) -> np.ndarray:
    return np.array([
        bucket.x - x0, bucket.z - z0, bucket.pitch - p0,
        summary.mean_velocity[0], summary.mean_velocity[1], summary.mean_velocity[2],
        summary.mean_force[0], summary.mean_force[1], summary.mean_force[2],
    ])
