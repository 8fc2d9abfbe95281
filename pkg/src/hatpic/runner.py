"""Closed-loop orchestration.

``SimulationRun`` wires firmware emulator, wire protocol, bridge and
virtual robot in one process on the simulated clock: single-threaded,
byte-deterministic, one trace row per control tick.

``LiveStack`` runs the same wiring against the wall clock with real
threads and optional network servers (TCP bus, WebSocket, static HTTP
for the console); it backs ``hatpicctl serve`` and real-time runs.
"""

from __future__ import annotations

import http.server
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

from .bridge import BridgeRuntime, DriverBridge
from .bus import BusMessage, TcpBusServer, TopicBus
from .clock import SimClock, WallClock
from .core import JoystickState
from .firmware import ControlLoop, FirmwareRuntime, TelemetrySender
from .robot import RobotState, step_robot
from .scenario import Scenario, ScenarioError, scenario_to_json
from .trace import TraceRow, write_trace
from .transport import open_transport, inproc_pair

__all__ = ["RunResult", "SimulationRun", "LiveStack", "parse_listen", "trace_metadata"]

log = logging.getLogger("hatpic.runner")


def parse_listen(spec: str) -> tuple[str, int]:
    """'host:port' -> (host, port); port may be 0 for ephemeral."""
    host, sep, port = spec.rpartition(":")
    if not sep or not host:
        raise ValueError(f"listen address must be host:port, got {spec!r}")
    return host, int(port)


def trace_metadata(scenario: Scenario) -> dict:
    return {"name": scenario.name, "scenario": scenario_to_json(scenario)}


@dataclass
class RunResult:
    scenario: Scenario
    rows: list[TraceRow]
    summary: dict
    messages: list[BusMessage] = field(default_factory=list)

    def write(self, path) -> None:
        write_trace(path, self.rows, trace_metadata(self.scenario))


def _summarize(rows, *, overruns: int, resyncs: int, crc_failures: int, extra=None) -> dict:
    tail = rows[max(0, len(rows) - max(1, len(rows) // 10)) :]
    summary = {
        "ticks": len(rows),
        "duration": rows[-1].t if rows else 0.0,
        "steady_state_theta": sum(r.theta for r in tail) / len(tail) if tail else 0.0,
        "max_abs_tau_fb_total": max((abs(r.tau_fb_total) for r in rows), default=0.0),
        "overruns": overruns,
        "resyncs": resyncs,
        "crc_failures": crc_failures,
    }
    if extra:
        summary.update(extra)
    return summary


class SimulationRun:
    """Deterministic single-threaded closed-loop run.

    Tick order: control tick, clock advance, telemetry flush (which makes
    the bridge publish states and references), robot step, paced
    robot/state publish (which makes the bridge send a feedback frame,
    applied by the firmware on the next tick), bridge timers, trace row.
    """

    def __init__(self, scenario: Scenario, keep_messages: bool = False):
        if scenario.bridge.device_transport != "inproc":
            raise ScenarioError(
                [
                    "bridge.device_transport: only 'inproc' works under the simulated clock; "
                    "use --realtime for tcp/pty"
                ]
            )
        self.scenario = scenario
        self.clock = SimClock()
        self.bus = TopicBus()
        self.loop = ControlLoop(
            scenario.admittance,
            scenario.profile,
            scenario.servo,
            scenario.operator,
            initial_state=JoystickState(theta=scenario.initial_theta),
        )
        self.bridge = DriverBridge(
            scenario.bridge, self.bus, device_tx=self.loop.receive, now_fn=self.clock.now
        )
        self.sender = TelemetrySender(
            self.loop, self.bridge.handle_device_bytes, rate=scenario.telemetry_rate
        )
        self.robot = RobotState()
        self._p_ref = 0.0
        self.bus.subscribe("robot/ref", self._on_ref)
        self.messages: list[BusMessage] | None = [] if keep_messages else None
        if keep_messages:
            self.bus.subscribe("*", self.messages.append)

    def _on_ref(self, msg: BusMessage) -> None:
        self._p_ref = msg.body["p_ref"]

    def run(self) -> RunResult:
        sc = self.scenario
        dt = sc.admittance.dt
        n_steps = max(1, round(sc.duration / dt))
        publish_div = max(1, round((1.0 / dt) / sc.bridge.publish_rate))
        rows: list[TraceRow] = []
        for n in range(n_steps):
            record = self.loop.tick()
            self.clock.advance(dt)
            now = self.clock.now()
            self.sender.poll(now)
            self.robot = step_robot(self.robot, self._p_ref, sc.world, dt)
            if (n + 1) % publish_div == 0:
                self.bus.publish(
                    BusMessage(
                        topic="robot/state",
                        t=now,
                        body={
                            "p": self.robot.p,
                            "v": self.robot.v,
                            "f_contact": self.robot.f_contact,
                        },
                    )
                )
            self.bridge.poll()
            rows.append(
                TraceRow(
                    t=record.state.t,
                    theta=record.state.theta,
                    omega=record.state.omega,
                    tau_operator=record.state.tau_operator,
                    tau_fb_rec=record.tau_rec,
                    tau_fb_ext=record.tau_ext,
                    tau_fb_total=record.tau_fb_total,
                    v_ref=self.bridge.ref.v_ref,
                    p_ref=self.bridge.ref.p_ref,
                    p=self.robot.p,
                    f_contact=self.robot.f_contact,
                )
            )
        summary = _summarize(
            rows,
            overruns=0,
            resyncs=self.loop.rx_diagnostics.resyncs + self.bridge.parser.diagnostics.resyncs,
            crc_failures=self.loop.rx_diagnostics.crc_failures
            + self.bridge.parser.diagnostics.crc_failures,
            extra={
                "frames_rx": self.bridge.frames_rx,
                "feedback_tx": self.bridge.feedback_tx,
                "refs_published": self.bridge.refs_published,
            },
        )
        return RunResult(
            scenario=sc, rows=rows, summary=summary, messages=self.messages or []
        )


def _open_device_link(spec: str):
    """Returns (firmware_side, bridge_side) transports for a live stack."""
    if spec == "inproc":
        return inproc_pair()
    if spec.startswith("tcp:"):
        rest = spec[len("tcp:") :]
        box: list = []
        err: list = []

        def _listen():
            try:
                box.append(open_transport(f"tcp-listen:{rest}", connect_timeout=5.0))
            except OSError as exc:
                err.append(exc)

        listener = threading.Thread(target=_listen, daemon=True)
        listener.start()
        deadline = time.monotonic() + 5.0
        client = None
        while time.monotonic() < deadline:
            try:
                client = open_transport(spec, connect_timeout=0.5)
                break
            except OSError:
                if err:
                    raise err[0]
                time.sleep(0.05)
        listener.join(timeout=5.0)
        if err:
            raise err[0]
        if client is None or not box:
            raise OSError(f"could not establish device link on {spec}")
        return box[0], client
    if spec == "pty" or spec.startswith("pty:"):
        fw_side = open_transport("pty")
        bridge_side = open_transport(f"pty:{fw_side.slave_path}")
        return fw_side, bridge_side
    raise ValueError(f"unsupported device transport {spec!r}")


class LiveStack:
    """Wall-clock firmware + bridge + robot threads, with optional servers.

    ``servers=True`` exposes the TCP bus, the WebSocket mirror, and (when
    ``assets_dir`` exists) a static HTTP server for the operator console.
    Trace rows are collected per control tick when ``record`` is set; the
    newest ``max_rows`` are kept.
    """

    def __init__(
        self,
        scenario: Scenario,
        record: bool = True,
        servers: bool = False,
        assets_dir=None,
        max_rows: int = 2_000_000,
    ):
        self.scenario = scenario
        self.bus = TopicBus()
        self.loop = ControlLoop(
            scenario.admittance,
            scenario.profile,
            scenario.servo,
            scenario.operator,
            initial_state=JoystickState(theta=scenario.initial_theta),
        )
        self.fw_transport, self.host_transport = _open_device_link(
            scenario.bridge.device_transport
        )
        self.firmware = FirmwareRuntime(
            self.loop,
            self.fw_transport,
            telemetry_rate=scenario.telemetry_rate,
            on_tick=self._on_tick if record else None,
        )
        self.bridge = DriverBridge(
            scenario.bridge, self.bus, device_tx=self.host_transport, now_fn=time.monotonic
        )
        self.bridge.extra_diag = lambda: {
            "ticks": self.loop.ticks,
            "overruns": self.firmware.overruns,
        }
        self.bridge_rt = BridgeRuntime(self.bridge, self.host_transport)

        self.robot = RobotState()
        self._p_ref = 0.0
        self.bus.subscribe("robot/ref", self._on_ref)

        self._rows = None
        if record:
            from collections import deque

            self._rows = deque(maxlen=max_rows)

        self.bus_server = None
        self.ws_hub = None
        self.http_server = None
        self._http_thread = None
        if servers:
            host, port = parse_listen(scenario.bridge.bus_listen)
            self.bus_server = TcpBusServer(self.bus, host, port)
            from .ws import WsHub

            ws_host, ws_port = parse_listen(scenario.bridge.ws_listen)
            self.ws_hub = WsHub(ws_host, ws_port, on_message=self._on_ws_message)
            self.bus.subscribe("*", lambda msg: self.ws_hub.broadcast(msg.to_line().decode()))
            if assets_dir is not None and Path(assets_dir).is_dir():
                handler = partial(
                    http.server.SimpleHTTPRequestHandler, directory=str(assets_dir)
                )
                http_host, http_port = parse_listen(scenario.bridge.http_listen)
                self.http_server = http.server.ThreadingHTTPServer(
                    (http_host, http_port), handler
                )
                self.http_server.daemon_threads = True

        self._stop = threading.Event()
        self._robot_thread: threading.Thread | None = None

    # -- wiring --------------------------------------------------------------

    def _on_ref(self, msg: BusMessage) -> None:
        self._p_ref = msg.body["p_ref"]

    def _on_tick(self, record) -> None:
        if self._rows is None:
            return
        robot = self.robot
        ref = self.bridge.ref
        self._rows.append(
            TraceRow(
                t=record.state.t,
                theta=record.state.theta,
                omega=record.state.omega,
                tau_operator=record.state.tau_operator,
                tau_fb_rec=record.tau_rec,
                tau_fb_ext=record.tau_ext,
                tau_fb_total=record.tau_fb_total,
                v_ref=ref.v_ref,
                p_ref=ref.p_ref,
                p=robot.p,
                f_contact=robot.f_contact,
            )
        )

    def _on_ws_message(self, obj: dict) -> None:
        topic = obj.get("topic")
        if topic == "operator/torque":
            tau = float(obj.get("tau"))
            if not math.isfinite(tau):
                raise ValueError("tau must be finite")
            self.loop.operator_mailbox.post(tau)
        elif topic == "operator/params":
            body = {k: v for k, v in obj.items() if k != "topic"}
            self.bridge.handle_operator_params(body)
        else:
            raise ValueError(f"unroutable topic {topic!r}")

    def _robot_main(self) -> None:
        sc = self.scenario
        dt = sc.admittance.dt
        clock = WallClock()
        publish_div = max(1, round((1.0 / dt) / sc.bridge.publish_rate))
        deadline = clock.now() + dt
        n = 0
        while not self._stop.is_set():
            self.robot = step_robot(self.robot, self._p_ref, sc.world, dt)
            n += 1
            if n % publish_div == 0:
                self.bus.publish(
                    BusMessage(
                        topic="robot/state",
                        t=clock.now(),
                        body={
                            "p": self.robot.p,
                            "v": self.robot.v,
                            "f_contact": self.robot.f_contact,
                        },
                    )
                )
            deadline += dt
            now = clock.now()
            if deadline < now:
                deadline = now
            clock.sleep_until(deadline)

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        if self.bus_server is not None:
            self.bus_server.start()
        if self.ws_hub is not None:
            self.ws_hub.start()
        if self.http_server is not None:
            self._http_thread = threading.Thread(
                target=self.http_server.serve_forever, daemon=True, name="http-assets"
            )
            self._http_thread.start()
        self.firmware.start()
        self.bridge_rt.start()
        self._robot_thread = threading.Thread(target=self._robot_main, daemon=True, name="robot")
        self._robot_thread.start()
        log.info(
            "live stack up: bus=%s ws=%s http=%s",
            self.bus_server.port if self.bus_server else "-",
            self.ws_hub.port if self.ws_hub else "-",
            self.http_server.server_address[1] if self.http_server else "-",
        )

    def stop(self) -> None:
        self._stop.set()
        self.firmware.stop()
        self.bridge_rt.stop()
        if self._robot_thread is not None:
            self._robot_thread.join(timeout=2.0)
        if self.ws_hub is not None:
            self.ws_hub.stop()
        if self.bus_server is not None:
            self.bus_server.stop()
        if self.http_server is not None:
            self.http_server.shutdown()
            if self._http_thread is not None:
                self._http_thread.join(timeout=2.0)
        for t in (self.fw_transport, self.host_transport):
            try:
                t.close()
            except OSError:
                pass

    def run_for(self, duration: float) -> RunResult:
        self.start()
        try:
            time.sleep(duration)
        finally:
            self.stop()
        return self.result()

    def result(self) -> RunResult:
        rows = list(self._rows) if self._rows is not None else []
        summary = _summarize(
            rows,
            overruns=self.firmware.overruns,
            resyncs=self.loop.rx_diagnostics.resyncs + self.bridge.parser.diagnostics.resyncs,
            crc_failures=self.loop.rx_diagnostics.crc_failures
            + self.bridge.parser.diagnostics.crc_failures,
            extra={
                "frames_rx": self.bridge.frames_rx,
                "feedback_tx": self.bridge.feedback_tx,
                "refs_published": self.bridge.refs_published,
            },
        )
        return RunResult(scenario=self.scenario, rows=rows, summary=summary)
