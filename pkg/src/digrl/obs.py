"""Observation layout and normalization statistics.

The policy observation is a fixed 25-dim concatenation:
  [0:3]   relative bucket pose (x, z, pitch) w.r.t. the initial contact pose
  [3:6]   bucket velocities (mean over the last agent step)
  [6:9]   contact forces (fx, fz, mpitch, mean over the last agent step)
  [9:17]  z_t     — latent from the current trajectory prefix
  [17:25] z_demo  — latent from demonstration trajectories of the terrain
Only the first 9 dims (the raw context) are normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CONTEXT_DIM = 9
LATENT_DIM = 8
OBS_DIM = CONTEXT_DIM + 2 * LATENT_DIM

STD_FLOOR = 1e-6


@dataclass(frozen=True)
class NormStats:
    """Per-dimension mean/std of the raw 9-dim contexts."""

    obs_mean: np.ndarray
    obs_std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "obs_mean", np.asarray(self.obs_mean, dtype=float))
        object.__setattr__(self, "obs_std",
                           np.maximum(np.asarray(self.obs_std, dtype=float), STD_FLOOR))

    @staticmethod
    def identity() -> "NormStats":
        return NormStats(np.zeros(CONTEXT_DIM), np.ones(CONTEXT_DIM))

    @staticmethod
    def from_contexts(contexts: np.ndarray) -> "NormStats":
        """Exact (order-independent) mean/std via compensated summation."""
        contexts = np.asarray(contexts, dtype=float)
        if contexts.size == 0:
            raise ValueError("cannot compute normalization statistics from zero contexts")
        n = contexts.shape[0]
        mean = np.array([math.fsum(contexts[:, d]) / n for d in range(contexts.shape[1])])
        var = np.array([math.fsum((contexts[:, d] - mean[d]) ** 2) / n
                        for d in range(contexts.shape[1])])
        return NormStats(obs_mean=mean, obs_std=np.sqrt(var))

    def normalize(self, c: np.ndarray) -> np.ndarray:
        return (np.asarray(c, dtype=float) - self.obs_mean) / self.obs_std

    def denormalize(self, c: np.ndarray) -> np.ndarray:
        return np.asarray(c, dtype=float) * self.obs_std + self.obs_mean


@dataclass(frozen=True)
class Observation:
    """Fixed-layout policy observation."""

    vector: np.ndarray  # (25,)

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.shape != (OBS_DIM,):
            raise ValueError(f"observation must have shape ({OBS_DIM},), got {v.shape}")
        object.__setattr__(self, "vector", v)

    @property
    def x(self) -> np.ndarray:
        return self.vector[0:3]

    @property
    def xdot(self) -> np.ndarray:
        return self.vector[3:6]

    @property
    def f_ext(self) -> np.ndarray:
        return self.vector[6:9]

    @property
    def z_t(self) -> np.ndarray:
        return self.vector[9:17]

    @property
    def z_demo(self) -> np.ndarray:
        return self.vector[17:25]


def assemble_observation(context: np.ndarray, z_t: np.ndarray, z_demo: np.ndarray,
                         stats: NormStats) -> Observation:
    """Concatenate [normalized context | z_t | z_demo]."""
    return Observation(np.concatenate([stats.normalize(context),
                                       np.asarray(z_t, dtype=float),
                                       np.asarray(z_demo, dtype=float)]))
