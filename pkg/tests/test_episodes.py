"""Reward function, scripted policy, and episode protocol."""

import numpy as np
import pytest

from digrl.episodes import (MAX_AGENT_STEPS, RewardParams, compute_reward,
                            make_scripted_policy, run_baseline_episode,
                            run_episode, scripted_policy)
from digrl.primitives import NormalizedAction
from digrl.sim import ContactReading
from digrl.terrain import TerrainSpec, get_preset

RP = RewardParams()


def flat_spec(**overrides):
    base = dict(name="flat", cell_width=0.01, layer_depth=0.005,
                block_prob=0.0, block_force_scale=100.0, base_stiffness=1e-6,
                friction_coeff=0.3, agitation_sweep=0.5, agitation_rotate=0.6)
    base.update(overrides)
    return TerrainSpec(**base)


# --- reward hand values (exact) ---

def test_reward_at_target_with_zero_force_is_zero():
    assert compute_reward(0.05, ContactReading(0, 0, 0), RP) == 0.0


def test_reward_hand_value_surface_heavy_force():
    # -400 * 0.05^2 - 0.0004 * 50^2 = -1.0 - 1.0
    r = compute_reward(0.0, ContactReading(50.0, 0.0, 0.0), RP)
    assert r == pytest.approx(-2.0, abs=1e-12)


def test_reward_hand_value_mid_depth():
    # -400 * 0.02^2 - 0.0004 * (100 + 100 + 25)
    r = compute_reward(0.03, ContactReading(10.0, 10.0, 5.0), RP)
    assert r == pytest.approx(-0.25, abs=1e-12)


def test_reward_clamps_overshoot():
    assert compute_reward(0.08, ContactReading(0, 0, 0), RP) == 0.0


def test_reward_nonpositive_and_monotone_in_depth():
    rng = np.random.default_rng(0)
    for _ in range(200):
        f = ContactReading(*rng.uniform(-80, 80, 3))
        d1, d2 = sorted(rng.uniform(0, 0.05, 2))
        r1 = compute_reward(d1, f, RP)
        r2 = compute_reward(d2, f, RP)
        assert r1 <= 0.0 and r2 <= 0.0
        assert r2 >= r1


def test_reward_rejects_negative_depth():
    with pytest.raises(ValueError):
        compute_reward(-0.01, ContactReading(0, 0, 0), RP)


# --- scripted policy ---

def test_scripted_policy_uniform_statistics():
    rng = np.random.default_rng(42)
    samples = np.array([scripted_policy(rng).a for _ in range(10_000)])
    assert samples.shape == (10_000, 8)
    assert np.all(samples >= -1.0) and np.all(samples <= 1.0)
    assert np.all(np.abs(samples.mean(axis=0)) < 0.03)


def test_scripted_policy_deterministic_under_seed():
    s1 = [scripted_policy(np.random.default_rng(7)).a for _ in range(1)]
    a = np.array([scripted_policy(np.random.default_rng(7)).a for _ in range(20)][0])
    b = np.array([scripted_policy(np.random.default_rng(7)).a for _ in range(20)][0])
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(s1[0], a)


# --- episode protocol ---

def test_zero_velocity_policy_times_out_at_cap():
    policy = lambda obs: NormalizedAction(np.zeros(8))
    tr = run_episode(get_preset("sand"), 3, policy)
    assert tr.outcome == "timeout"
    assert len(tr) == MAX_AGENT_STEPS
    assert all(not t.done for t in tr.transitions)
    # no motion, no contact force: each step contributes exactly the
    # depth-gap penalty at depth 0
    expected = -RP.w1 * RP.d_target ** 2
    assert tr.reward_sum() == pytest.approx(expected * MAX_AGENT_STEPS, rel=1e-12)


def test_baseline_on_empty_terrain_succeeds_in_25_steps():
    tr = run_baseline_episode(flat_spec(), 11)
    assert tr.outcome == "success"
    assert len(tr) == 25  # 0.05 m at 0.002 m per step


def test_outcome_trichotomy_and_done_flags():
    spec = get_preset("marble_chips")
    for i in range(15):
        rng = np.random.default_rng(np.random.SeedSequence([i, 7]))
        tr = run_episode(spec, i, make_scripted_policy(rng))
        assert tr.outcome in ("success", "jam", "timeout")
        if tr.outcome == "timeout":
            assert len(tr) == MAX_AGENT_STEPS and not tr.transitions[-1].done
        else:
            assert tr.transitions[-1].done
            assert all(not t.done for t in tr.transitions[:-1])


def test_scripted_sand_episode_length_band():
    spec = get_preset("sand")
    lengths = []
    for i in range(100):
        rng = np.random.default_rng(np.random.SeedSequence([i, 7]))
        lengths.append(len(run_episode(spec, i, make_scripted_policy(rng))))
    assert 50.0 <= float(np.mean(lengths)) <= 100.0


def test_episode_deterministic_under_seed():
    spec = get_preset("pea_pebbles")

    def run(seed):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
        return run_episode(spec, seed, make_scripted_policy(rng))

    t1, t2 = run(5), run(5)
    assert t1.outcome == t2.outcome and len(t1) == len(t2)
    np.testing.assert_array_equal(t1.contexts(), t2.contexts())
    np.testing.assert_array_equal(t1.actions(), t2.actions())
    assert t1.max_force == t2.max_force


def test_max_force_matches_transition_peak():
    spec = get_preset("wood_blocks")
    rng = np.random.default_rng(np.random.SeedSequence([2, 7]))
    tr = run_episode(spec, 2, make_scripted_policy(rng))
    # the recorded max is at least the largest per-step mean component
    step_peak = max(abs(v) for t in tr.transitions for v in t.context[6:9])
    assert tr.max_force >= step_peak - 1e-9


def test_context_layout_pose_velocity_force():
    spec = flat_spec(base_stiffness=250.0)
    policy = lambda obs: NormalizedAction(np.array([0, 0, 0, 0, 0, 0, -1.0, 1.0]))
    tr = run_episode(spec, 1, policy)
    assert tr.outcome == "success"
    c = tr.transitions[0].context
    assert c.shape == (9,)
    assert c[1] == pytest.approx(-0.003, rel=1e-9)  # z dropped 3 mm
    assert c[4] == pytest.approx(-0.03, rel=1e-9)  # mean vz
    assert c[7] > 0.0  # pressing force registered
