"""Offline RL for jam-free bucket penetration on a surrogate rigid-object terrain."""

from .episodes import RewardParams, Trajectory, Transition, compute_reward, run_episode
from .primitives import (NormalizedAction, PrimitiveParams, denormalize_action,
                         normalize_action)
from .sim import BucketState, ContactReading, HaltEvent, SimConfig, depth_of
from .terrain import TerrainGrid, TerrainSpec, get_preset, load_presets, make_terrain

__version__ = "0.1.0"
