"""Teleop service: protocol flow, clamping, loopback equivalence."""

import json
import socket
import threading
import time

import numpy as np
import pytest

from digrl.dataset import load_dataset
from digrl.episodes import run_episode
from digrl.primitives import NormalizedAction
from digrl.teleop import (FramedConnection, WebSocketClient, serve)
from digrl.terrain import get_preset


def free_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def start_server(tmp_path, transport, terrain="sand", seed=11, sessions=1):
    port = free_port()
    ready = threading.Event()
    thread = threading.Thread(
        target=serve,
        args=(port, get_preset(terrain), seed, tmp_path / "teleop"),
        kwargs={"transport": transport, "max_sessions": sessions,
                "ready_event": ready},
        daemon=True)
    thread.start()
    assert ready.wait(5.0)
    return port, thread


def connect(transport, port):
    if transport == "ws":
        return WebSocketClient.connect("127.0.0.1", port)
    sock = socket.create_connection(("127.0.0.1", port), timeout=10.0)
    return FramedConnection(sock)


def drive_episode(conn, actions, seed, lockstep=True):
    """Scripted client: hello, start, then one command per state."""
    conn.send({"kind": "hello", "version": 1})
    assert conn.recv()["kind"] == "hello"
    conn.send({"kind": "start", "terrain": "sand", "seed": seed,
               "lockstep": lockstep})
    states = [conn.recv()]
    assert states[0]["kind"] == "state" and states[0]["step"] == 0
    step = 0
    while True:
        conn.send({"kind": "command", "a": list(actions(step))})
        msg = conn.recv()
        assert msg["kind"] == "state"
        states.append(msg)
        step += 1
        if msg["done"]:
            break
    end = conn.recv()
    assert end["kind"] == "end"
    return states, end


@pytest.mark.parametrize("transport", ["tcp", "ws"])
def test_loopback_equivalence(tmp_path, transport):
    """A deterministic scripted client reproduces the library-level episode
    bit-for-bit (same seed, same per-step actions)."""
    seed = 21
    rng = np.random.default_rng(5)
    action_table = [rng.uniform(-1, 1, 8) for _ in range(200)]
    actions = lambda step: action_table[step]

    port, thread = start_server(tmp_path, transport, seed=seed)
    conn = connect(transport, port)
    try:
        states, end = drive_episode(conn, actions, seed)
    finally:
        conn.close()
    thread.join(timeout=10.0)

    recorded = load_dataset(tmp_path / "teleop")
    assert len(recorded.trajectories) == 1
    remote = recorded.trajectories[0]
    assert remote.source == "teleop"

    step_iter = iter(action_table)
    local = run_episode(get_preset("sand"), seed,
                        lambda obs: NormalizedAction(next(step_iter)))
    assert remote.outcome == local.outcome == end["outcome"]
    assert len(remote) == len(local) == len(states) - 1
    np.testing.assert_array_equal(remote.contexts(), local.contexts())
    np.testing.assert_array_equal(remote.actions(), local.actions())
    assert remote.max_force == local.max_force
    assert [t.reward for t in remote.transitions] == \
           [t.reward for t in local.transitions]
    assert end["reward_sum"] == pytest.approx(local.reward_sum(), abs=0.0)


def test_state_per_step_until_end(tmp_path):
    port, thread = start_server(tmp_path, "tcp", seed=3)
    conn = connect("tcp", port)
    try:
        states, end = drive_episode(conn, lambda step: np.zeros(8), 3)
    finally:
        conn.close()
    # zero commands: timeout at the cap, one state per step plus the initial
    assert end["outcome"] == "timeout"
    assert len(states) == 151
    steps = [s["step"] for s in states]
    assert steps == list(range(151))


def test_command_clamping_is_flagged(tmp_path):
    port, thread = start_server(tmp_path, "tcp", seed=4)
    conn = connect("tcp", port)
    try:
        conn.send({"kind": "hello", "version": 1})
        conn.recv()
        conn.send({"kind": "start", "terrain": "sand", "seed": 4,
                   "lockstep": True})
        conn.recv()
        conn.send({"kind": "command", "a": [3.0, 0, 0, 0, 0, 0, 0, 0]})
        state = conn.recv()
        assert state["clamped"] is True
        conn.send({"kind": "command", "a": [0.5, 0, 0, 0, 0, 0, 0, 0]})
        state = conn.recv()
        assert state["clamped"] is False
    finally:
        conn.close()


def test_malformed_command_gets_error_and_session_continues(tmp_path):
    port, thread = start_server(tmp_path, "tcp", seed=5)
    conn = connect("tcp", port)
    try:
        conn.send({"kind": "hello", "version": 1})
        conn.recv()
        conn.send({"kind": "start", "terrain": "sand", "seed": 5,
                   "lockstep": True})
        conn.recv()
        conn.send({"kind": "command", "a": [1.0, 2.0]})  # wrong length
        err = conn.recv()
        assert err["kind"] == "error"
        conn.send({"kind": "command", "a": [0.0] * 8})
        state = conn.recv()
        assert state["kind"] == "state" and state["step"] == 1
    finally:
        conn.close()


def test_disconnect_mid_episode_discards_trajectory(tmp_path):
    port, thread = start_server(tmp_path, "tcp", seed=6)
    conn = connect("tcp", port)
    conn.send({"kind": "hello", "version": 1})
    conn.recv()
    conn.send({"kind": "start", "terrain": "sand", "seed": 6, "lockstep": True})
    conn.recv()
    conn.send({"kind": "command", "a": [0.0] * 8})
    conn.recv()
    conn.close()  # drop mid-episode
    thread.join(timeout=10.0)
    assert not (tmp_path / "teleop" / "meta.json").exists()
