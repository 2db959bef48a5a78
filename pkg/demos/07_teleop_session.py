"""Drive the teleop service with a scripted client over the wire protocol.

Starts the WebSocket server in a thread, connects, runs one lockstep episode
with a fixed aggressive action, and shows that the recorded trajectory equals
the library-level episode bit-for-bit. The browser panel in frontend/ speaks
exactly this protocol.

Run:  python3 demos/07_teleop_session.py
"""

import socket
import threading

import numpy as np

from digrl.dataset import load_dataset
from digrl.episodes import run_episode
from digrl.primitives import NormalizedAction
from digrl.teleop import WebSocketClient, serve
from digrl.terrain import get_preset

sock = socket.socket()
sock.bind(("127.0.0.1", 0))
port = sock.getsockname()[1]
sock.close()

out = "/tmp/digrl_demo_teleop"
ready = threading.Event()
server = threading.Thread(
    target=serve, args=(port, get_preset("pea_pebbles"), 42, out),
    kwargs={"transport": "ws", "max_sessions": 1, "ready_event": ready},
    daemon=True)
server.start()
ready.wait(5.0)

action = [0.6, 0.0, 0.0, 0.4, 0.0, 0.0, -1.0, -0.3]
client = WebSocketClient.connect("127.0.0.1", port)
client.send({"kind": "hello", "version": 1})
print("server hello:", client.recv())
client.send({"kind": "start", "terrain": "pea_pebbles", "seed": 42,
             "lockstep": True})
state = client.recv()
while not state["done"]:
    client.send({"kind": "command", "a": action})
    state = client.recv()
    if state["step"] % 5 == 0:
        print(f"step {state['step']:3d}: depth {state['depth'] * 1000:5.1f} mm, "
              f"fz {state['force'][1]:5.1f} N, reward {state['reward_sum']:7.2f}")
end = client.recv()
client.close()
server.join(timeout=5.0)
print("episode:", end)

recorded = load_dataset(out).trajectories[0]
local = run_episode(get_preset("pea_pebbles"), 42,
                    lambda obs: NormalizedAction(np.array(action)))
same = (np.array_equal(recorded.contexts(), local.contexts())
        and recorded.outcome == local.outcome)
print(f"recorded teleop trajectory == offline episode: {same}")
