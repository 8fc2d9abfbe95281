"""
Tapping the live bus
====================

Starts the real-time stack (firmware thread, bridge, robot, TCP bus) on
ephemeral ports, connects a client like any external tool would, and
prints a second of traffic. This is the same path `hatpicctl serve`
takes; nothing here is simulation-only.
"""

import time
from dataclasses import replace

from hatpic.bus import BusClient
from hatpic.runner import LiveStack
from hatpic.scenario import bundled_scenarios, load_scenario

sc = load_scenario(next(p for p in bundled_scenarios() if p.stem == "sine"))
sc = replace(
    sc,
    bridge=replace(sc.bridge, bus_listen="127.0.0.1:0", ws_listen="127.0.0.1:0", http_listen="127.0.0.1:0"),
)

stack = LiveStack(sc, record=False, servers=True)
stack.start()
try:
    print(f"bus up on 127.0.0.1:{stack.bus_server.port}")
    client = BusClient("127.0.0.1", stack.bus_server.port)
    client.subscribe("robot/*")
    client.subscribe("bridge/diag")

    shown = 0
    deadline = time.monotonic() + 1.2
    while time.monotonic() < deadline:
        msg = client.recv(timeout=0.5)
        if msg is None:
            continue
        # robot/state arrives at 500 Hz; thin it out for the terminal
        if msg.topic == "robot/state":
            shown += 1
            if shown % 100 != 0:
                continue
        print(f"{msg.topic:13s} t={msg.t:9.3f}  {msg.body}")
    client.close()
finally:
    stack.stop()
