"""Host-side middleware between the device link and the robot bus.

The bridge decodes device dataframes, republishes the joystick state,
turns deflection into the robot velocity/position reference, and routes
robot contact force back to the device as feedback torque frames. It
also mirrors all bus traffic to WebSocket clients (the operator console)
and accepts operator torque / parameter edits from them.

Reference integration happens here, on the host: the device only ever
reports deflection. v_ref drops to zero while the device link is down so
a dead joystick can never command motion.
"""

from __future__ import annotations

import math
import threading
import time
from collections import deque
from dataclasses import dataclass

from .bus import BusMessage, TopicBus
from .core import ReferenceState, integrate_reference, velocity_reference
from .firmware import FEEDBACK_DECAY_OVER, FEEDBACK_STALE_AFTER
from .protocol import (
    FTYPE_CONFIG_ACK,
    FTYPE_CONFIG_SET,
    FTYPE_FEEDBACK,
    FTYPE_TELEMETRY,
    ConfigAckPayload,
    ConfigSetPayload,
    FeedbackPayload,
    Frame,
    StreamParser,
    TelemetryPayload,
    dequantize_payload,
    encode,
)

__all__ = ["BridgeConfig", "DriverBridge", "BridgeRuntime"]

T_US_WRAP = 2**32 / 1e6  # device timestamp wrap period, seconds


@dataclass
class BridgeConfig:
    device_transport: str = "inproc"
    bus_listen: str = "127.0.0.1:7750"
    ws_listen: str = "127.0.0.1:7751"
    http_listen: str = "127.0.0.1:7752"  # operator console static assets
    v_max: float = 2.0  # m/s at theta = 2 rad (reference slope is v_max/2)
    publish_rate: float = 500.0  # Hz, robot/ref ceiling and feedback pacing
    feedback_gain: float = 0.022  # N*m of device torque per N of contact force
    input_deadzone: float = 0.05  # rad, applied before the velocity map
    f_max: float = 20.0  # N, contact force mapped at most to gain*f_max

    def __post_init__(self):
        if not (math.isfinite(self.v_max) and self.v_max > 0):
            raise ValueError(f"v_max must be > 0, got {self.v_max!r}")
        if not (math.isfinite(self.publish_rate) and self.publish_rate > 0):
            raise ValueError(f"publish_rate must be > 0, got {self.publish_rate!r}")
        if not math.isfinite(self.feedback_gain):
            raise ValueError("feedback_gain must be finite")
        if self.input_deadzone < 0:
            raise ValueError("input_deadzone must be >= 0")
        if not (math.isfinite(self.f_max) and self.f_max > 0):
            raise ValueError(f"f_max must be > 0, got {self.f_max!r}")


class DriverBridge:
    """Protocol/translation core of the middleware; owns no threads.

    ``now_fn`` supplies host time: wall time in the live runtime, the
    simulation clock in deterministic runs. Reference publishing is paced
    by *device* timestamps so a replayed capture reproduces the exact
    robot/ref sequence regardless of host timing.
    """

    def __init__(self, config: BridgeConfig, bus: TopicBus, device_tx, now_fn=time.monotonic):
        self.config = config
        self.bus = bus
        self.device_tx = device_tx  # callable(bytes) or ByteTransport
        self.now = now_fn
        self.parser = StreamParser()
        self.ref = ReferenceState(v_ref=0.0, p_ref=0.0, v_max=config.v_max)
        self.ref_period = 1.0 / config.publish_rate

        self._last_device_t = 0.0
        self._next_ref_device_t = 0.0
        self._seq = 0
        self._tx_lock = threading.Lock()  # feedback/config frames may race

        self._fb_held = 0.0
        self._fb_rx_at = -math.inf  # host time of last robot/state
        self._next_fb_pace = 0.0
        self._next_diag = 0.0

        self.frames_rx = 0
        self.acks_rx = 0
        self.feedback_tx = 0
        self.refs_published = 0
        self.malformed = 0
        self.link_lost = 0
        self.latency_us = deque(maxlen=4096)
        self.extra_diag = None  # optional callable -> dict merged into diag
        self.on_config_ack = None  # optional callable(ok: bool)

        bus.subscribe("robot/state", self._on_robot_state)

    # -- device -> host ------------------------------------------------------

    def handle_device_bytes(self, data: bytes) -> int:
        """Parse and process a chunk from the device; returns frames seen."""
        frames = self.parser.feed(data)
        for frame in frames:
            if frame.ftype == FTYPE_TELEMETRY:
                self._on_telemetry(TelemetryPayload.unpack(frame.payload))
            elif frame.ftype == FTYPE_CONFIG_ACK:
                self._on_config_ack(ConfigAckPayload.unpack(frame.payload))
            # feedback/config-set are device-bound; a device echoing them
            # is harmless and ignored
        return len(frames)

    def _on_telemetry(self, payload: TelemetryPayload) -> None:
        state = dequantize_payload(payload)
        self.frames_rx += 1
        self.bus.publish(
            BusMessage(
                topic="joystick/state",
                t=state.t,
                body={
                    "theta": state.theta,
                    "omega": state.omega,
                    "tau_operator": state.tau_operator,
                },
            )
        )
        dt = state.t - self._last_device_t
        if dt < -T_US_WRAP / 2:
            dt += T_US_WRAP  # timestamp wrapped
        v_new = velocity_reference(state.theta, self.config.v_max, self.config.input_deadzone)
        if dt > 0:
            self.ref = integrate_reference(self.ref, v_new, dt)
        else:
            self.ref = ReferenceState(v_ref=v_new, p_ref=self.ref.p_ref, v_max=self.ref.v_max)
        self._last_device_t = state.t

        if state.t + 1e-12 >= self._next_ref_device_t:
            self._publish_ref(state.t)
            base = max(self._next_ref_device_t, state.t)
            self._next_ref_device_t = base + self.ref_period

    def _publish_ref(self, t: float) -> None:
        self.bus.publish(
            BusMessage(
                topic="robot/ref",
                t=t,
                body={"v_ref": self.ref.v_ref, "p_ref": self.ref.p_ref},
            )
        )
        self.refs_published += 1

    def _on_config_ack(self, ack: ConfigAckPayload) -> None:
        self.acks_rx += 1
        self.bus.publish(
            BusMessage(
                topic="bridge/diag",
                t=self.now(),
                body={"event": "config_ack", "ok": ack.ok},
            )
        )
        if self.on_config_ack is not None:
            self.on_config_ack(ack.ok)

    # -- robot -> device -----------------------------------------------------

    def _on_robot_state(self, msg: BusMessage) -> None:
        f = msg.body.get("f_contact")
        if not isinstance(f, (int, float)) or not math.isfinite(f):
            self.malformed += 1
            return
        f = min(max(float(f), -self.config.f_max), self.config.f_max)
        self._fb_held = -self.config.feedback_gain * f
        self._fb_rx_at = self.now()
        self._send_feedback(self._fb_held)

    def _send_feedback(self, tau_ext: float) -> None:
        payload = FeedbackPayload(tau_ext_unm=round(tau_ext * 1e6))
        self._tx_frame(FTYPE_FEEDBACK, payload.pack())
        self.feedback_tx += 1

    def _tx_frame(self, ftype: int, payload: bytes) -> None:
        with self._tx_lock:
            data = encode(Frame(ftype=ftype, seq=self._seq, payload=payload))
            self._seq = (self._seq + 1) & 0xFF
            write = getattr(self.device_tx, "write", None)
            if write is not None:
                write(data)
            else:
                self.device_tx(data)

    def push_config(self, payload: ConfigSetPayload) -> None:
        """Send a parameter push to the device (acked asynchronously)."""
        self._tx_frame(FTYPE_CONFIG_SET, payload.pack())

    def handle_operator_params(self, body: dict) -> bool:
        """Route a parameter-edit message; returns True if pushed to device.

        v_max and input_deadzone are host-side and apply immediately; all
        other keys form a config-set frame. A v_max-only edit is acked
        locally since no device round-trip happens.
        """
        host_only = True
        if "v_max" in body:
            v = float(body["v_max"])
            if not (math.isfinite(v) and v > 0):
                raise ValueError("v_max must be > 0")
            self.config.v_max = v
            self.ref = ReferenceState(v_ref=self.ref.v_ref, p_ref=self.ref.p_ref, v_max=v)
        if "input_deadzone" in body:
            dz = float(body["input_deadzone"])
            if not (math.isfinite(dz) and dz >= 0):
                raise ValueError("input_deadzone must be >= 0")
            self.config.input_deadzone = dz
        fw_keys = (
            "d_adm",
            "m_adm",
            "tau_max",
            "theta0",
            "q_dz",
            "n",
            "k_min",
            "k_max",
            "theta_max",
        )
        if any(k in body for k in fw_keys):
            missing = [k for k in fw_keys if k not in body]
            if missing:
                raise ValueError(f"parameter edit missing keys: {', '.join(missing)}")
            self.push_config(ConfigSetPayload(**{k: float(body[k]) for k in fw_keys}))
            host_only = False
        if host_only:
            self._on_config_ack(ConfigAckPayload(ok=True))
            self.acks_rx -= 1  # synthesized, not from the device
        return not host_only

    # -- pacing and diagnostics ----------------------------------------------

    def poll(self) -> None:
        """Timer duties: stale-feedback decay frames and 1 Hz diagnostics."""
        now = self.now()
        age = now - self._fb_rx_at
        if age > FEEDBACK_STALE_AFTER and self._fb_rx_at > -math.inf:
            while self._next_fb_pace <= now:
                fade = 1.0 - (age - FEEDBACK_STALE_AFTER) / FEEDBACK_DECAY_OVER
                self._send_feedback(self._fb_held * fade if fade > 0 else 0.0)
                self._next_fb_pace = max(self._next_fb_pace + self.ref_period, now)
        else:
            self._next_fb_pace = now + self.ref_period
        if now >= self._next_diag:
            self.publish_diag(now)
            self._next_diag = now + 1.0

    def publish_diag(self, now: float | None = None) -> None:
        body = {
            "frames_rx": self.frames_rx,
            "acks_rx": self.acks_rx,
            "feedback_tx": self.feedback_tx,
            "refs_published": self.refs_published,
            "malformed": self.malformed,
            "link_lost": self.link_lost,
            "resyncs": self.parser.diagnostics.resyncs,
            "crc_failures": self.parser.diagnostics.crc_failures,
            "unknown_type": self.parser.diagnostics.unknown_type,
        }
        if self.latency_us:
            ordered = sorted(self.latency_us)
            body["latency_p50_us"] = ordered[len(ordered) // 2]
            body["latency_p99_us"] = ordered[min(len(ordered) - 1, (len(ordered) * 99) // 100)]
        if self.extra_diag is not None:
            body.update(self.extra_diag())
        self.bus.publish(BusMessage(topic="bridge/diag", t=now if now is not None else self.now(), body=body))


class BridgeRuntime:
    """Threads around a DriverBridge for live operation.

    One thread reads the device transport, one runs the pacing duties.
    On a dead device link the reference is forced to zero velocity, a
    diag event is emitted, and reconnection is retried with backoff by
    the owner (LiveStack) since reopening is transport-specific.
    """

    def __init__(self, bridge: DriverBridge, transport, poll_interval: float | None = None):
        self.bridge = bridge
        self.transport = transport
        self.poll_interval = poll_interval or min(0.002, bridge.ref_period)
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        self._threads = [
            threading.Thread(target=self._rx_main, daemon=True, name="bridge-rx"),
            threading.Thread(target=self._pace_main, daemon=True, name="bridge-pace"),
        ]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)

    def _rx_main(self) -> None:
        from .transport import TransportError

        while not self._stop.is_set():
            try:
                data = self.transport.read()
            except TransportError:
                self.bridge.link_lost += 1
                self.bridge.ref = ReferenceState(
                    v_ref=0.0, p_ref=self.bridge.ref.p_ref, v_max=self.bridge.ref.v_max
                )
                self.bridge.bus.publish(
                    BusMessage(
                        topic="bridge/diag",
                        t=self.bridge.now(),
                        body={"event": "device_link_lost"},
                    )
                )
                return
            if data:
                t0 = time.perf_counter()
                self.bridge.handle_device_bytes(data)
                self.bridge.latency_us.append((time.perf_counter() - t0) * 1e6)
            else:
                time.sleep(0.0005)

    def _pace_main(self) -> None:
        while not self._stop.is_set():
            self.bridge.poll()
            time.sleep(self.poll_interval)
