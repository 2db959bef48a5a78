"""Toy chain MDPs with a value-iteration oracle (stitching checks)."""

import numpy as np

from digrl.iql import TransitionArrays

N_STATES = 5
GAMMA = 0.99


def make_chain_mdp(rng):
    """Deterministic 5-state line; goal at a random end; per-step cost."""
    goal = 4 if rng.integers(2) else 0
    return {"goal": goal,
            "step_cost": float(rng.uniform(0.2, 1.0)),
            "goal_reward": float(rng.uniform(5.0, 10.0))}


def chain_step(mdp, s, a):
    s2 = min(max(s + a, 0), N_STATES - 1)
    r = -mdp["step_cost"] + (mdp["goal_reward"] if s2 == mdp["goal"] else 0.0)
    return s2, r, s2 == mdp["goal"]


def value_iteration(mdp, gamma=GAMMA, iters=500):
    v = np.zeros(N_STATES)
    q = np.zeros((N_STATES, 2))
    for _ in range(iters):
        for s in range(N_STATES):
            if s == mdp["goal"]:
                continue
            for j, a in enumerate((-1, 1)):
                s2, r, done = chain_step(mdp, s, a)
                q[s, j] = r + (0.0 if done else gamma * v[s2])
        v_new = q.max(axis=1)
        v_new[mdp["goal"]] = 0.0
        if np.allclose(v_new, v, atol=1e-12):
            v = v_new
            break
        v = v_new
    optimal = {s: (-1, 1)[int(np.argmax(q[s]))]
               for s in range(N_STATES) if s != mdp["goal"]}
    return optimal, q


def chain_dataset(mdp, rng):
    """Two overlapping suboptimal demonstrations: a wandering walk from the
    far end that never reaches the goal, and a completion walk starting next
    to the far end. Every covered state keeps its optimal action in-support
    (IQL only maximizes over in-sample actions), and stitching the two walks
    yields the optimal path from the far end."""
    toward = 1 if mdp["goal"] == N_STATES - 1 else -1
    far = 0 if mdp["goal"] == N_STATES - 1 else N_STATES - 1

    transitions = []

    def add(s, a):
        s2, r, done = chain_step(mdp, s, a)
        transitions.append((s, a, r, s2, done))
        return s2

    s = far
    for _ in range(12):
        if abs(s - mdp["goal"]) <= 1:
            a = -toward  # veer away from the goal
        else:
            a = toward if rng.random() < 0.6 else -toward
        s = add(s, a)
    s = far + toward
    done = False
    while not done:
        s2, r, done = chain_step(mdp, s, toward)
        transitions.append((s, toward, r, s2, done))
        s = s2

    obs = np.zeros((len(transitions), N_STATES))
    next_obs = np.zeros((len(transitions), N_STATES))
    acts = np.zeros((len(transitions), 1))
    rews = np.zeros(len(transitions))
    dones = np.zeros(len(transitions))
    covered = set()
    for i, (s, a, r, s2, d) in enumerate(transitions):
        obs[i, s] = 1.0
        next_obs[i, s2] = 1.0
        acts[i, 0] = float(a)
        rews[i] = r
        dones[i] = float(d)
        covered.add(s)
    covered.discard(mdp["goal"])
    return TransitionArrays(obs=obs, act=acts, rew=rews,
                            next_obs=next_obs, done=dones), covered
