"""Live teleoperation service: one session at a time over newline-delimited
JSON (TCP) or WebSocket text frames, one message per frame.

Message kinds: hello, start, state, command, end, reset, error. A session
begins hello -> start; the server emits one state per agent step until end.
`start` may request lockstep mode, where the server waits for a command
between steps -- the deterministic replay path. In the default streaming mode
states are pushed at the agent rate and the latest received command is held
until replaced.
"""

from __future__ import annotations

import base64
import hashlib
import json
import socket
import socketserver
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, save_dataset
from .episodes import AGENT_DT, EpisodeRunner, RewardParams
from .obs import NormStats
from .primitives import ACTION_DIM, NormalizedAction
from .sim import SimConfig
from .terrain import TerrainSpec, get_preset

PROTOCOL_VERSION = 1

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


# --- framing ---

class FramedConnection:
    """One JSON object per frame; newline framing over raw TCP."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._buf = b""

    def send(self, obj: dict) -> None:
        self.sock.sendall(json.dumps(obj, separators=(",", ":")).encode() + b"\n")

    def recv(self) -> dict | None:
        while b"\n" not in self._buf:
            chunk = self.sock.recv(65536)
            if not chunk:
                return None
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        if not line.strip():
            return self.recv()
        return json.loads(line.decode())

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def _ws_accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def _ws_read_exact(sock: socket.socket, n: int) -> bytes:
    data = b""
    while len(data) < n:
        chunk = sock.recv(n - len(data))
        if not chunk:
            raise ConnectionError("websocket peer closed")
        data += chunk
    return data


def ws_encode(payload: bytes, mask: bool, opcode: int = 0x1) -> bytes:
    header = bytes([0x80 | opcode])
    length = len(payload)
    mask_bit = 0x80 if mask else 0x00
    if length < 126:
        header += bytes([mask_bit | length])
    elif length < 1 << 16:
        header += bytes([mask_bit | 126]) + length.to_bytes(2, "big")
    else:
        header += bytes([mask_bit | 127]) + length.to_bytes(8, "big")
    if mask:
        key = b"\x12\x34\x56\x78"
        masked = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return header + key + masked
    return header + payload


def ws_decode(sock: socket.socket) -> tuple[int, bytes] | None:
    try:
        head = _ws_read_exact(sock, 2)
    except (ConnectionError, OSError):
        return None
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        length = int.from_bytes(_ws_read_exact(sock, 2), "big")
    elif length == 127:
        length = int.from_bytes(_ws_read_exact(sock, 8), "big")
    key = _ws_read_exact(sock, 4) if masked else b""
    payload = _ws_read_exact(sock, length) if length else b""
    if masked:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, payload


class WebSocketConnection:
    """Server-side WebSocket endpoint after a completed upgrade handshake."""

    def __init__(self, sock: socket.socket):
        self.sock = sock

    @staticmethod
    def upgrade(sock: socket.socket) -> "WebSocketConnection":
        request = b""
        while b"\r\n\r\n" not in request:
            chunk = sock.recv(65536)
            if not chunk:
                raise ConnectionError("closed during websocket handshake")
            request += chunk
        headers = {}
        for line in request.decode(errors="replace").split("\r\n")[1:]:
            if ":" in line:
                k, v = line.split(":", 1)
                headers[k.strip().lower()] = v.strip()
        key = headers.get("sec-websocket-key")
        if not key:
            raise ConnectionError("missing Sec-WebSocket-Key")
        response = ("HTTP/1.1 101 Switching Protocols\r\n"
                    "Upgrade: websocket\r\n"
                    "Connection: Upgrade\r\n"
                    f"Sec-WebSocket-Accept: {_ws_accept_key(key)}\r\n\r\n")
        sock.sendall(response.encode())
        return WebSocketConnection(sock)

    def send(self, obj: dict) -> None:
        payload = json.dumps(obj, separators=(",", ":")).encode()
        self.sock.sendall(ws_encode(payload, mask=False))

    def recv(self) -> dict | None:
        while True:
            frame = ws_decode(self.sock)
            if frame is None:
                return None
            opcode, payload = frame
            if opcode == 0x8:  # close
                return None
            if opcode == 0x9:  # ping -> pong
                self.sock.sendall(ws_encode(payload, mask=False, opcode=0xA))
                continue
            if opcode in (0x1, 0x2):
                return json.loads(payload.decode())

    def close(self) -> None:
        try:
            self.sock.sendall(ws_encode(b"", mask=False, opcode=0x8))
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class WebSocketClient(WebSocketConnection):
    """Minimal client endpoint (tests and scripted drivers)."""

    @staticmethod
    def connect(host: str, port: int, timeout: float = 10.0) -> "WebSocketClient":
        sock = socket.create_connection((host, port), timeout=timeout)
        key = base64.b64encode(b"digrl-client-key").decode()
        request = (f"GET / HTTP/1.1\r\nHost: {host}:{port}\r\n"
                   "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                   f"Sec-WebSocket-Key: {key}\r\n"
                   "Sec-WebSocket-Version: 13\r\n\r\n")
        sock.sendall(request.encode())
        response = b""
        while b"\r\n\r\n" not in response:
            chunk = sock.recv(65536)
            if not chunk:
                raise ConnectionError("closed during websocket handshake")
            response += chunk
        if b"101" not in response.split(b"\r\n", 1)[0]:
            raise ConnectionError(f"websocket upgrade refused: {response[:120]!r}")
        return WebSocketClient(sock)

    def send(self, obj: dict) -> None:
        payload = json.dumps(obj, separators=(",", ":")).encode()
        self.sock.sendall(ws_encode(payload, mask=True))


# --- session ---

@dataclass
class TeleopConfig:
    out_dir: Path
    terrain: TerrainSpec
    seed: int
    cfg: SimConfig
    reward: RewardParams
    rate_hz: float = 10.0


class TeleopSession:
    """Drives episodes over one connection; writes finished trajectories to
    the standard dataset layout (source=teleop)."""

    def __init__(self, conn, tc: TeleopConfig):
        self.conn = conn
        self.tc = tc
        self.trajectories = []
        self.episode_index = 0

    def run(self) -> None:
        hello = self.conn.recv()
        if hello is None:
            return
        if hello.get("kind") != "hello":
            self.conn.send({"kind": "error", "msg": "expected hello"})
            return
        self.conn.send({"kind": "hello", "version": PROTOCOL_VERSION})
        while True:
            msg = self.conn.recv()
            if msg is None:
                return
            kind = msg.get("kind")
            if kind == "start":
                self._episode(msg)
            elif kind == "reset":
                continue  # nothing in progress between episodes
            elif kind == "end":
                return
            else:
                self.conn.send({"kind": "error",
                                "msg": f"unexpected message kind {kind!r}"})

    # one episode; returns on end/reset/disconnect
    def _episode(self, start_msg: dict) -> None:
        terrain = self.tc.terrain
        if "terrain" in start_msg and start_msg["terrain"] != terrain.name:
            try:
                terrain = get_preset(start_msg["terrain"])
            except Exception as e:
                self.conn.send({"kind": "error", "msg": str(e)})
                return
        seed = int(start_msg.get("seed", self.tc.seed + self.episode_index))
        lockstep = bool(start_msg.get("lockstep", False))
        runner = EpisodeRunner(terrain, seed, cfg=self.tc.cfg,
                               reward=self.tc.reward, source="teleop")
        clamped = False
        command = NormalizedAction(np.zeros(ACTION_DIM))
        self._send_state(runner, 0, clamped)

        mailbox: dict = {"command": command, "clamped": False, "closed": False,
                         "reset": False}
        reader = None
        if not lockstep:
            reader = threading.Thread(target=self._reader_loop, args=(mailbox,),
                                      daemon=True)
            reader.start()

        try:
            while not runner.done:
                if lockstep:
                    msg = self.conn.recv()
                    if msg is None:
                        return  # disconnect: discard episode
                    kind = msg.get("kind")
                    if kind == "reset":
                        return
                    if kind != "command":
                        self.conn.send({"kind": "error",
                                        "msg": f"expected command, got {kind!r}"})
                        continue
                    command, clamped = self._parse_command(msg)
                    if command is None:
                        continue
                else:
                    time.sleep(1.0 / self.tc.rate_hz)
                    if mailbox["closed"]:
                        return
                    if mailbox["reset"]:
                        return
                    command = mailbox["command"]
                    clamped = mailbox["clamped"]
                runner.step(command)
                self._send_state(runner, runner.steps, clamped)
            self._finish(runner)
        finally:
            if reader is not None:
                mailbox["stop"] = True

    def _parse_command(self, msg: dict):
        try:
            raw = np.asarray(msg["a"], dtype=float)
            if raw.shape != (ACTION_DIM,):
                raise ValueError(f"need {ACTION_DIM} floats, got shape {raw.shape}")
        except (KeyError, TypeError, ValueError) as e:
            self.conn.send({"kind": "error", "msg": f"bad command: {e}"})
            return None, False
        clamped = bool(np.any(raw < -1.0) or np.any(raw > 1.0))
        return NormalizedAction(raw), clamped

    def _reader_loop(self, mailbox: dict) -> None:
        while not mailbox.get("stop"):
            try:
                msg = self.conn.recv()
            except (OSError, ConnectionError, json.JSONDecodeError):
                mailbox["closed"] = True
                return
            if msg is None:
                mailbox["closed"] = True
                return
            kind = msg.get("kind")
            if kind == "command":
                command, clamped = self._parse_command(msg)
                if command is not None:
                    mailbox["command"] = command
                    mailbox["clamped"] = clamped
            elif kind == "reset":
                mailbox["reset"] = True
                return

    def _send_state(self, runner: EpisodeRunner, step: int, clamped: bool) -> None:
        s = runner.last_summary
        bucket = runner.bucket
        if s is None:
            vel = [0.0, 0.0, 0.0]
            force = [0.0, 0.0, 0.0]
        else:
            vel = [float(v) for v in s.mean_velocity]
            force = [float(v) for v in s.mean_force]
        self.conn.send({
            "kind": "state", "step": step,
            "pose": [bucket.x, bucket.z, bucket.pitch],
            "vel": vel, "force": force,
            "depth": runner.depth(),
            "reward_sum": runner.reward_sum,
            "clamped": clamped,
            "done": runner.done,
        })

    def _finish(self, runner: EpisodeRunner) -> None:
        traj = runner.trajectory()
        self.trajectories.append(traj)
        self.episode_index += 1
        self._write_dataset()
        self.conn.send({"kind": "end", "outcome": traj.outcome,
                        "reward_sum": runner.reward_sum})

    def _write_dataset(self) -> None:
        contexts = np.concatenate([t.contexts() for t in self.trajectories])
        ds = Dataset(trajectories=list(self.trajectories),
                     norm_stats=NormStats.from_contexts(contexts),
                     reward=self.tc.reward,
                     generation_seeds={"teleop": {"base": self.tc.seed}})
        save_dataset(ds, self.tc.out_dir)


def serve(port: int, terrain: TerrainSpec, seed: int, out_dir: str | Path,
          transport: str = "ws", cfg: SimConfig | None = None,
          reward: RewardParams | None = None, rate_hz: float = 10.0,
          max_sessions: int | None = None,
          ready_event: threading.Event | None = None) -> None:
    """Accept teleop sessions one at a time until max_sessions is reached."""
    tc = TeleopConfig(out_dir=Path(out_dir), terrain=terrain, seed=seed,
                      cfg=cfg or SimConfig(), reward=reward or RewardParams(),
                      rate_hz=rate_hz)
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind(("127.0.0.1", port))
    server.listen(1)
    if ready_event is not None:
        ready_event.set()
    sessions = 0
    try:
        while max_sessions is None or sessions < max_sessions:
            sock, _ = server.accept()
            try:
                if transport == "ws":
                    conn = WebSocketConnection.upgrade(sock)
                else:
                    conn = FramedConnection(sock)
                TeleopSession(conn, tc).run()
            except (ConnectionError, OSError, json.JSONDecodeError):
                pass
            finally:
                try:
                    sock.close()
                except OSError:
                    pass
            sessions += 1
    finally:
        server.close()
