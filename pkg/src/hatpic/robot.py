"""Virtual 1-DoF robot tracking the position reference along the world x axis.

The robot is kinematic-with-bandwidth: it closes a first-order loop on
p_ref rather than simulating joint dynamics, which is all the bilateral
loop needs -- a credible, tunable source of contact force. A one-sided
spring-damper wall provides that force.

Contact also pushes back on the tracking itself: the commanded velocity
is reduced by bandwidth * f_contact / k_virtual, i.e. the tracker behaves
like a virtual spring of stiffness k_virtual between the robot and its
reference. In steady contact this puts the robot between the wall and
p_ref with k_virtual * (p_ref - p) = f_contact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["RobotState", "WorldConfig", "step_robot"]


@dataclass(frozen=True)
class RobotState:
    p: float = 0.0  # m, along world x
    v: float = 0.0  # m/s
    f_contact: float = 0.0  # N, >= 0; zero whenever p is short of the wall

    def __post_init__(self):
        for v in (self.p, self.v, self.f_contact):
            if not math.isfinite(v):
                raise ValueError(f"robot state must be finite, got {self!r}")


@dataclass(frozen=True)
class WorldConfig:
    bandwidth: float = 20.0  # 1/s, tracking pole
    wall_position: float = math.inf  # m; +inf disables contact
    wall_stiffness: float = 500.0  # N/m
    wall_damping: float = 0.0  # N*s/m, acts only while moving into the wall
    k_virtual: float = 500.0  # N/m, tracker compliance under contact force
    max_speed: float = math.inf  # m/s, command saturation

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth!r}")
        for name in ("wall_stiffness", "wall_damping", "k_virtual", "max_speed"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")


def step_robot(state: RobotState, p_ref: float, world: WorldConfig, dt: float) -> RobotState:
    """Advance the robot by dt toward p_ref.

    Semi-implicit: the new velocity moves the position, and the contact
    force is evaluated at the new position so the stored state is
    self-consistent (f_contact == wall force at p).
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    v = world.bandwidth * (p_ref - state.p)
    if state.f_contact > 0.0 and world.k_virtual > 0.0:
        v -= world.bandwidth * state.f_contact / world.k_virtual
    if v > world.max_speed:
        v = world.max_speed
    elif v < -world.max_speed:
        v = -world.max_speed
    p = state.p + dt * v

    penetration = p - world.wall_position
    if penetration > 0.0:
        f = world.wall_stiffness * penetration
        if v > 0.0:
            f += world.wall_damping * v
        # the wall pushes, never pulls
        f = max(f, 0.0)
    else:
        f = 0.0
    return RobotState(p=p, v=v, f_contact=f)


def _main(argv=None) -> int:
    """Run the robot as its own process against a remote bus.

    Subscribes to robot/ref, steps at a fixed rate, publishes robot/state
    at the publish rate. The in-process thread inside `hatpicctl serve`
    is the default deployment; this entry point exists for multi-process
    setups and bus interoperability checks.
    """
    import argparse
    import time

    from .bus import BusClient, BusError

    parser = argparse.ArgumentParser(prog="python -m hatpic.robot", description=_main.__doc__)
    parser.add_argument("--bus", default="127.0.0.1:7750", help="bus address host:port")
    parser.add_argument("--rate", type=float, default=1000.0, help="integration rate Hz")
    parser.add_argument("--publish-rate", type=float, default=500.0, help="robot/state rate Hz")
    parser.add_argument("--bandwidth", type=float, default=20.0)
    parser.add_argument("--wall-position", type=float, default=math.inf)
    parser.add_argument("--wall-stiffness", type=float, default=500.0)
    parser.add_argument("--wall-damping", type=float, default=0.0)
    parser.add_argument("--k-virtual", type=float, default=500.0)
    parser.add_argument("--max-speed", type=float, default=math.inf)
    args = parser.parse_args(argv)

    host, _, port = args.bus.rpartition(":")
    world = WorldConfig(
        bandwidth=args.bandwidth,
        wall_position=args.wall_position,
        wall_stiffness=args.wall_stiffness,
        wall_damping=args.wall_damping,
        k_virtual=args.k_virtual,
        max_speed=args.max_speed,
    )
    try:
        client = BusClient(host or "127.0.0.1", int(port))
    except OSError as exc:
        print(f"cannot reach bus at {args.bus}: {exc}")
        return 3
    client.subscribe("robot/ref")

    from .bus import BusMessage

    state = RobotState()
    p_ref = 0.0
    dt = 1.0 / args.rate
    publish_div = max(1, round(args.rate / args.publish_rate))
    deadline = time.perf_counter() + dt
    n = 0
    try:
        while True:
            try:
                msg = client.recv(timeout=0.0005)
            except BusError:
                msg = None
            if msg is not None and msg.topic == "robot/ref":
                p_ref = float(msg.body.get("p_ref", p_ref))
            state = step_robot(state, p_ref, world, dt)
            n += 1
            if n % publish_div == 0:
                client.publish(
                    BusMessage(
                        topic="robot/state",
                        t=time.perf_counter(),
                        body={"p": state.p, "v": state.v, "f_contact": state.f_contact},
                    )
                )
            remaining = deadline - time.perf_counter()
            if remaining > 0:
                time.sleep(remaining)
                deadline += dt
            else:
                deadline = time.perf_counter() + dt
    except (KeyboardInterrupt, ConnectionError):
        return 0
    finally:
        client.close()


if __name__ == "__main__":
    import sys

    sys.exit(_main())
