"""Offline RL: implicit Q-learning with expectile regression and
advantage-weighted policy extraction, plus the behavioral-cloning baseline,
observation assembly, and online fine-tuning.

The trainer core operates on flat transition arrays so the same code drives
both the excavation pipeline (observations assembled from contexts + frozen
encoder latents) and tabular-encoded toy MDPs used by the stitching oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .autodiff import Tensor, as_tensor
from .dataset import Dataset
from .encoders import EncoderParams, IncrementalContextEncoder, encode_demo
from .episodes import RewardParams, Trajectory, run_episode
from .errors import ConfigurationError, NumericError
from .nn import (AdamState, ParamSet, adam_update, init_mlp, load_arrays,
                 mlp_forward, mlp_parameters, save_arrays)
from .obs import CONTEXT_DIM, LATENT_DIM, OBS_DIM, NormStats, Observation, \
    assemble_observation
from .primitives import ACTION_DIM, NormalizedAction
from .sim import SimConfig
from .terrain import TerrainSpec

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class IQLHyper:
    gamma: float = 0.99
    expectile_tau: float = 0.7
    awr_beta: float = 3.0
    weight_clip: float = 100.0
    lr: float = 3e-4
    batch: int = 256
    target_soft_update: float = 0.005
    gradient_steps: int = 100_000
    hidden: tuple[int, ...] = (256, 256)

    def validate(self) -> None:
        if not (0.5 < self.expectile_tau < 1.0):
            raise ConfigurationError(f"expectile_tau must be in (0.5, 1), got {self.expectile_tau}")
        if not (0.0 < self.gamma < 1.0) and self.gamma != 0.0:
            raise ConfigurationError(f"gamma must be in [0, 1), got {self.gamma}")
        for name in ("awr_beta", "weight_clip", "lr", "batch",
                     "target_soft_update", "gradient_steps"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")


# --- expectile regression ---

def expectile_loss(u, tau: float):
    """|tau - 1(u < 0)| * u^2, elementwise."""
    u = np.asarray(u, dtype=float)
    weight = np.where(u < 0.0, 1.0 - tau, tau)
    return weight * u * u


def sample_expectile(xs, tau: float, iters: int = 200) -> float:
    """Minimizer of the expectile loss over a scalar sample (fixed point of
    the weighted mean)."""
    xs = np.asarray(xs, dtype=float)
    m = float(xs.mean())
    for _ in range(iters):
        w = np.where(xs < m, 1.0 - tau, tau)
        new = float((w * xs).sum() / w.sum())
        if abs(new - m) < 1e-14:
            return new
        m = new
    return m


# --- transition arrays ---

@dataclass
class TransitionArrays:
    obs: np.ndarray
    act: np.ndarray
    rew: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray

    def __len__(self) -> int:
        return self.obs.shape[0]

    def append(self, other: "TransitionArrays") -> "TransitionArrays":
        return TransitionArrays(
            obs=np.concatenate([self.obs, other.obs]),
            act=np.concatenate([self.act, other.act]),
            rew=np.concatenate([self.rew, other.rew]),
            next_obs=np.concatenate([self.next_obs, other.next_obs]),
            done=np.concatenate([self.done, other.done]),
        )


def build_observation(context, prefix, demo_z, norm_stats: NormStats,
                      encoder: EncoderParams) -> Observation:
    """[normalized context | z_t from the prefix | z_demo]."""
    from .encoders import encode_current
    z_t = encode_current(encoder, prefix)
    return assemble_observation(context, z_t, demo_z, norm_stats)


def default_z_demo_map(dataset: Dataset, demo_encoder: EncoderParams,
                       k: int = 10) -> dict[str, np.ndarray]:
    """Per-terrain z_demo from the first k stored trajectories."""
    return {terrain: encode_demo(demo_encoder, dataset.by_terrain(terrain), k)
            for terrain in dataset.terrains}


def trajectory_to_arrays(traj: Trajectory, encoder: EncoderParams,
                         z_demo: np.ndarray, stats: NormStats) -> TransitionArrays:
    """Observations rebuilt from stored contexts: obs_t pairs the previous
    transition's context (zeros at t=1) with the latent of the prefix before
    step t; next_obs_t advances both by one step."""
    T = len(traj)
    contexts = traj.contexts()
    latents = np.zeros((T + 1, encoder.latent_dim))
    inc = IncrementalContextEncoder(encoder)
    for t in range(T):
        latents[t + 1] = inc.feed(contexts[t])
    norm = stats.normalize(contexts)
    zero_ctx = stats.normalize(np.zeros(CONTEXT_DIM))
    obs = np.zeros((T, OBS_DIM))
    next_obs = np.zeros((T, OBS_DIM))
    for t in range(T):
        prev_ctx = zero_ctx if t == 0 else norm[t - 1]
        obs[t] = np.concatenate([prev_ctx, latents[t], z_demo])
        next_obs[t] = np.concatenate([norm[t], latents[t + 1], z_demo])
    return TransitionArrays(
        obs=obs,
        act=traj.actions(),
        rew=np.array([tr.reward for tr in traj.transitions]),
        next_obs=next_obs,
        done=np.array([float(tr.done) for tr in traj.transitions]),
    )


def build_transition_arrays(dataset: Dataset, encoder: EncoderParams,
                            z_demo_map: dict[str, np.ndarray],
                            stats: NormStats | None = None) -> TransitionArrays:
    stats = stats or dataset.norm_stats
    parts = [trajectory_to_arrays(t, encoder, z_demo_map[t.terrain], stats)
             for t in dataset.trajectories if len(t) > 0]
    return TransitionArrays(
        obs=np.concatenate([p.obs for p in parts]),
        act=np.concatenate([p.act for p in parts]),
        rew=np.concatenate([p.rew for p in parts]),
        next_obs=np.concatenate([p.next_obs for p in parts]),
        done=np.concatenate([p.done for p in parts]),
    )


# --- agent networks ---

@dataclass
class AgentCheckpoint:
    q1: ParamSet
    q2: ParamSet
    q1_target: ParamSet
    q2_target: ParamSet
    v: ParamSet
    policy: ParamSet  # MLP + "log_std" parameter
    hyper: IQLHyper
    obs_dim: int
    act_dim: int
    train_seed: int
    algo: str = "iql"
    steps_trained: int = 0
    stats: NormStats = field(default_factory=NormStats.identity)
    encoder_refs: dict = field(default_factory=dict)

    def networks(self) -> dict[str, ParamSet]:
        return {"q1": self.q1, "q2": self.q2, "q1_target": self.q1_target,
                "q2_target": self.q2_target, "v": self.v, "policy": self.policy}

    def checksum(self) -> str:
        import hashlib
        h = hashlib.sha256()
        for name, ps in self.networks().items():
            h.update(name.encode())
            h.update(ps.checksum().encode())
        return h.hexdigest()


def init_agent(obs_dim: int, act_dim: int, hyper: IQLHyper, seed: int,
               stats: NormStats | None = None, algo: str = "iql") -> AgentCheckpoint:
    hyper.validate()
    ss = np.random.SeedSequence([seed, 0x1A])
    rngs = [np.random.default_rng(c) for c in ss.spawn(4)]
    dims_q = (obs_dim + act_dim, *hyper.hidden, 1)
    dims_v = (obs_dim, *hyper.hidden, 1)
    dims_pi = (obs_dim, *hyper.hidden, act_dim)
    q1 = init_mlp(dims_q, rngs[0])
    q2 = init_mlp(dims_q, rngs[1])
    v = init_mlp(dims_v, rngs[2])
    policy = init_mlp(dims_pi, rngs[3])
    policy.add("log_std", np.full(act_dim, -1.0))
    return AgentCheckpoint(q1=q1, q2=q2, q1_target=q1.copy(), q2_target=q2.copy(),
                           v=v, policy=policy, hyper=hyper, obs_dim=obs_dim,
                           act_dim=act_dim, train_seed=seed, algo=algo,
                           stats=stats or NormStats.identity())

def _mlp_np(params: ParamSet, x: np.ndarray) -> np.ndarray:
    """Tape-free forward pass sharing the same weights (targets, rollouts)."""
    dims = params["meta.dims"].data.astype(int)
    h = np.atleast_2d(x)
    n_layers = len(dims) - 1
    for i in range(n_layers):
        h = h @ params[f"layer{i}.W"].data + params[f"layer{i}.b"].data
        if i < n_layers - 1:
            h = np.maximum(h, 0.0)
    return h


def policy_mean_np(policy: ParamSet, obs: np.ndarray) -> np.ndarray:
    return np.tanh(_mlp_np(policy, obs))


def act(checkpoint: AgentCheckpoint, obs: Observation | np.ndarray,
        mode: str = "eval", rng: np.random.Generator | None = None
        ) -> NormalizedAction:
    """eval: tanh-bounded mean; sample: Gaussian draw clamped to the box."""
    vec = obs.vector if isinstance(obs, Observation) else np.asarray(obs, dtype=float)
    mean = policy_mean_np(checkpoint.policy, vec)[0]
    if mode == "eval":
        return NormalizedAction(mean)
    if mode != "sample":
        raise ValueError(f"mode must be 'eval' or 'sample', got {mode!r}")
    if rng is None:
        raise ValueError("sample mode needs an rng")
    std = np.exp(np.clip(checkpoint.policy["log_std"].data, LOG_STD_MIN, LOG_STD_MAX))
    return NormalizedAction(mean + std * rng.standard_normal(checkpoint.act_dim))


def _soft_update(target: ParamSet, online: ParamSet, tau: float) -> None:
    for name in online.names():
        if name.startswith("meta."):
            continue
        target[name].data *= (1.0 - tau)
        target[name].data += tau * online[name].data


def _assert_finite_grads(tensors: list[Tensor], what: str) -> None:
    for t in tensors:
        if t.grad is not None and not np.isfinite(t.grad).all():
            raise NumericError(f"non-finite gradient in {what}")


@dataclass
class _Trainer:
    ckpt: AgentCheckpoint
    adam_q1: AdamState
    adam_q2: AdamState
    adam_v: AdamState
    adam_pi: AdamState
    rng: np.random.Generator

    @staticmethod
    def create(ckpt: AgentCheckpoint, seed: int) -> "_Trainer":
        lr = ckpt.hyper.lr
        return _Trainer(
            ckpt=ckpt,
            adam_q1=AdamState.for_tensors(mlp_parameters(ckpt.q1), lr=lr),
            adam_q2=AdamState.for_tensors(mlp_parameters(ckpt.q2), lr=lr),
            adam_v=AdamState.for_tensors(mlp_parameters(ckpt.v), lr=lr),
            adam_pi=AdamState.for_tensors(mlp_parameters(ckpt.policy), lr=lr),
            rng=np.random.default_rng(np.random.SeedSequence([seed, 0xB])),
        )

    def iql_step(self, data: TransitionArrays) -> dict[str, float]:
        ckpt, hyper = self.ckpt, self.ckpt.hyper
        idx = self.rng.integers(len(data), size=hyper.batch)
        s = data.obs[idx]
        a = data.act[idx]
        r = data.rew[idx]
        s2 = data.next_obs[idx]
        d = data.done[idx]
        sa = np.concatenate([s, a], axis=1)

        # expectile value regression toward the conservative target critic
        tq = np.minimum(_mlp_np(ckpt.q1_target, sa), _mlp_np(ckpt.q2_target, sa))[:, 0]
        ckpt.v.zero_grads()
        v_out = mlp_forward(ckpt.v, s)
        u = tq[:, None] - v_out
        weight = np.where(u.data < 0.0, 1.0 - hyper.expectile_tau, hyper.expectile_tau)
        loss_v = (u.square() * weight).mean()
        loss_v.backward()
        v_params = mlp_parameters(ckpt.v)
        _assert_finite_grads(v_params, "V")
        adam_update(v_params, self.adam_v)

        # TD regression toward r + gamma * (1 - done) * V(s') with the fresh V
        y = r + hyper.gamma * (1.0 - d) * _mlp_np(ckpt.v, s2)[:, 0]
        losses = {}
        for name, q, adam in (("q1", ckpt.q1, self.adam_q1),
                              ("q2", ckpt.q2, self.adam_q2)):
            q.zero_grads()
            q_out = mlp_forward(q, sa)
            loss_q = (q_out - y[:, None]).square().mean()
            loss_q.backward()
            q_params = mlp_parameters(q)
            _assert_finite_grads(q_params, name)
            adam_update(q_params, adam)
            losses[name] = float(loss_q.data)

        # advantage-weighted regression on the policy
        adv = tq - _mlp_np(ckpt.v, s)[:, 0]
        w = np.minimum(np.exp(hyper.awr_beta * adv), hyper.weight_clip)
        ckpt.policy.zero_grads()
        mean = mlp_forward(ckpt.policy, s).tanh()
        log_std = ckpt.policy["log_std"].clip(LOG_STD_MIN, LOG_STD_MAX)
        inv_var = (log_std * -2.0).exp()
        diff_sq = (mean - a).square()
        logp = ((diff_sq * inv_var + log_std * 2.0 + _LOG_2PI) * -0.5)
        loss_pi = -(logp * w[:, None]).mean()
        loss_pi.backward()
        pi_params = mlp_parameters(ckpt.policy)
        _assert_finite_grads(pi_params, "policy")
        adam_update(pi_params, self.adam_pi)

        _soft_update(ckpt.q1_target, ckpt.q1, hyper.target_soft_update)
        _soft_update(ckpt.q2_target, ckpt.q2, hyper.target_soft_update)

        losses.update(v=float(loss_v.data), pi=float(loss_pi.data))
        for k, val in losses.items():
            if not np.isfinite(val):
                raise NumericError(f"non-finite {k} loss during IQL training")
        return losses

    def bc_step(self, data: TransitionArrays) -> float:
        ckpt = self.ckpt
        idx = self.rng.integers(len(data), size=ckpt.hyper.batch)
        s = data.obs[idx]
        a = data.act[idx]
        ckpt.policy.zero_grads()
        mean = mlp_forward(ckpt.policy, s).tanh()
        loss = (mean - a).square().mean()
        value = float(loss.data)
        if not np.isfinite(value):
            raise NumericError("non-finite BC loss")
        loss.backward()
        pi_params = mlp_parameters(ckpt.policy)
        _assert_finite_grads(pi_params, "bc-policy")
        adam_update(pi_params, self.adam_pi)
        return value


def train_iql_arrays(data: TransitionArrays, hyper: IQLHyper, seed: int,
                     stats: NormStats | None = None,
                     log_every: int = 0) -> AgentCheckpoint:
    """IQL over prebuilt transition arrays (the excavation pipeline and the
    toy stitching MDPs share this path)."""
    ckpt = init_agent(data.obs.shape[1], data.act.shape[1], hyper, seed,
                      stats=stats, algo="iql")
    trainer = _Trainer.create(ckpt, seed)
    for step in range(hyper.gradient_steps):
        losses = trainer.iql_step(data)
        if log_every and (step + 1) % log_every == 0:
            print(f"  iql step {step + 1}/{hyper.gradient_steps}: "
                  f"v={losses['v']:.4f} q1={losses['q1']:.4f} pi={losses['pi']:.4f}")
    ckpt.steps_trained = hyper.gradient_steps
    return ckpt


def train_iql(dataset: Dataset, hyper: IQLHyper, seed: int,
              current_encoder: EncoderParams, demo_encoder: EncoderParams,
              z_demo_map: dict[str, np.ndarray] | None = None,
              log_every: int = 0) -> AgentCheckpoint:
    z_demo_map = z_demo_map or default_z_demo_map(dataset, demo_encoder)
    data = build_transition_arrays(dataset, current_encoder, z_demo_map)
    ckpt = train_iql_arrays(data, hyper, seed, stats=dataset.norm_stats,
                            log_every=log_every)
    return ckpt


def train_bc(dataset: Dataset, seed: int,
             current_encoder: EncoderParams, demo_encoder: EncoderParams,
             hyper: IQLHyper | None = None,
             z_demo_map: dict[str, np.ndarray] | None = None) -> AgentCheckpoint:
    """Behavioral cloning: policy-only MSE on normalized actions, same
    observation assembly and frozen encoders as IQL."""
    hyper = hyper or IQLHyper()
    z_demo_map = z_demo_map or default_z_demo_map(dataset, demo_encoder)
    data = build_transition_arrays(dataset, current_encoder, z_demo_map)
    return train_bc_arrays(data, hyper, seed, stats=dataset.norm_stats)


def train_bc_arrays(data: TransitionArrays, hyper: IQLHyper, seed: int,
                    stats: NormStats | None = None) -> AgentCheckpoint:
    ckpt = init_agent(data.obs.shape[1], data.act.shape[1], hyper, seed,
                      stats=stats, algo="bc")
    trainer = _Trainer.create(ckpt, seed)
    for _ in range(hyper.gradient_steps):
        trainer.bc_step(data)
    ckpt.steps_trained = hyper.gradient_steps
    return ckpt


# --- rollouts with frozen encoders ---

class EpisodeObsBuilder:
    """Streams the prefix through the frozen current-encoder; one per episode."""

    def __init__(self, encoder: EncoderParams, z_demo: np.ndarray, stats: NormStats):
        self.inc = IncrementalContextEncoder(encoder)
        self.z_demo = np.asarray(z_demo, dtype=float)
        self.stats = stats
        self._fed = 0

    def __call__(self, c_prev: np.ndarray, prefix: list) -> Observation:
        while self._fed < len(prefix):
            self.inc.feed(prefix[self._fed])
            self._fed += 1
        return assemble_observation(c_prev, self.inc.current(), self.z_demo, self.stats)


def rollout_policy(spec: TerrainSpec, seed: int, ckpt: AgentCheckpoint,
                   encoder: EncoderParams, z_demo: np.ndarray,
                   mode: str = "eval", rng: np.random.Generator | None = None,
                   cfg: SimConfig | None = None,
                   reward: RewardParams | None = None,
                   source: str = "policy") -> Trajectory:
    builder = EpisodeObsBuilder(encoder, z_demo, ckpt.stats)
    policy = lambda obs: act(ckpt, obs, mode=mode, rng=rng)
    return run_episode(spec, seed, policy, cfg=cfg, reward=reward,
                       obs_builder=builder, source=source)


def finetune(ckpt: AgentCheckpoint, spec: TerrainSpec, n_traj: int, seed: int,
             dataset: Dataset, current_encoder: EncoderParams,
             z_demo: np.ndarray,
             steps_per_trajectory: int = 200,
             cfg: SimConfig | None = None,
             reward: RewardParams | None = None,
             evaluator: Callable[[AgentCheckpoint], dict] | None = None
             ) -> tuple[AgentCheckpoint, dict]:
    """Online fine-tuning: alternate sampled-policy collection with IQL
    gradient steps over the grown dataset (uniform sampling mixes the online
    and offline transitions)."""
    record: dict = {"terrain": spec.name, "n_traj": n_traj,
                    "collected": [], "before": None, "after": None}
    if n_traj == 0:
        return ckpt, record
    if evaluator is not None:
        record["before"] = evaluator(ckpt)

    data = build_transition_arrays(dataset, current_encoder,
                                   {t: z_demo for t in dataset.terrains},
                                   stats=ckpt.stats)
    trainer = _Trainer.create(ckpt, seed)
    sample_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF1]))
    for i in range(n_traj):
        ep_seed = int(np.random.SeedSequence([seed, 0xE9, i]).generate_state(1)[0])
        traj = rollout_policy(spec, ep_seed, ckpt, current_encoder, z_demo,
                              mode="sample", rng=sample_rng, cfg=cfg,
                              reward=reward, source="online")
        record["collected"].append({"seed": ep_seed, "outcome": traj.outcome,
                                    "reward": traj.reward_sum(), "len": len(traj)})
        if len(traj) > 0:
            data = data.append(trajectory_to_arrays(
                traj, current_encoder, z_demo, ckpt.stats))
        for _ in range(steps_per_trajectory):
            trainer.iql_step(data)
        ckpt.steps_trained += steps_per_trajectory

    if evaluator is not None:
        record["after"] = evaluator(ckpt)
    return ckpt, record


# --- persistence ---

def save_agent(path: str | Path, ckpt: AgentCheckpoint) -> None:
    arrays = {}
    for net, ps in ckpt.networks().items():
        for name in ps.names():
            arrays[f"{net}/{name}"] = ps[name].data
    arrays["stats/obs_mean"] = ckpt.stats.obs_mean
    arrays["stats/obs_std"] = ckpt.stats.obs_std
    hyper = {k: (list(v) if isinstance(v, tuple) else v)
             for k, v in vars(ckpt.hyper).items()}
    meta = {"algo": ckpt.algo, "obs_dim": ckpt.obs_dim, "act_dim": ckpt.act_dim,
            "train_seed": ckpt.train_seed, "steps_trained": ckpt.steps_trained,
            "hyper": hyper, "encoder_refs": ckpt.encoder_refs}
    save_arrays(path, arrays, meta)


def load_agent(path: str | Path) -> AgentCheckpoint:
    arrays, meta = load_arrays(path)
    nets: dict[str, ParamSet] = {}
    stats_arrays = {}
    for name, arr in arrays.items():
        prefix, rest = name.split("/", 1)
        if prefix == "stats":
            stats_arrays[rest] = arr
            continue
        nets.setdefault(prefix, ParamSet()).add(rest, arr)
    hyper_dict = dict(meta["hyper"])
    hyper_dict["hidden"] = tuple(hyper_dict["hidden"])
    hyper = IQLHyper(**hyper_dict)
    return AgentCheckpoint(
        q1=nets["q1"], q2=nets["q2"], q1_target=nets["q1_target"],
        q2_target=nets["q2_target"], v=nets["v"], policy=nets["policy"],
        hyper=hyper, obs_dim=int(meta["obs_dim"]), act_dim=int(meta["act_dim"]),
        train_seed=int(meta["train_seed"]), algo=meta["algo"],
        steps_trained=int(meta["steps_trained"]),
        stats=NormStats(obs_mean=stats_arrays["obs_mean"],
                        obs_std=stats_arrays["obs_std"]),
        encoder_refs=dict(meta.get("encoder_refs", {})))


def resolve_z_demo(spec: TerrainSpec, dataset: Dataset | None,
                   demo_encoder: EncoderParams, seed: int,
                   cfg: SimConfig | None = None,
                   reward: RewardParams | None = None,
                   k: int = 10) -> np.ndarray:
    """z_demo for a terrain: k trajectories from the offline dataset when the
    terrain is covered, otherwise k freshly collected scripted trajectories
    (the unseen-terrain protocol)."""
    from .episodes import make_scripted_policy
    trajs = dataset.by_terrain(spec.name) if dataset is not None else []
    if len(trajs) >= k:
        return encode_demo(demo_encoder, trajs[:k], k)
    fresh = []
    for i in range(k):
        ep_seed = int(np.random.SeedSequence([seed, 0xD0, i]).generate_state(1)[0])
        rng = np.random.default_rng(np.random.SeedSequence([ep_seed, 7]))
        fresh.append(run_episode(spec, ep_seed, make_scripted_policy(rng),
                                 cfg=cfg, reward=reward))
    return encode_demo(demo_encoder, fresh, k)
