"""Device microcontroller emulator.

Mirrors the two-task firmware split: a fixed-rate control loop computing
the feedback torque pipeline and stepping the admittance dynamics, and a
telemetry sender pacing encoded state frames onto the serial transport.
The tasks share nothing but a single-producer/single-consumer sample
queue; external inputs (feedback torque, operator torque, config pushes)
arrive through latest-value mailboxes.

The control tick, in order: poll feedback (zero-order hold with staleness
decay), evaluate the operator torque, re-centering stiffness and torque,
sum + clamp to the actuator ceiling, add the virtual hard-stop spring,
step the dynamics, quantize the encoder reading, emit a telemetry sample.

Timing is injected (see clock.py): `FirmwareRuntime` paces two real
threads against the wall clock; `run_control_loop` drives the same tick
deterministically for headless runs and tests.
"""

from __future__ import annotations

import math
import threading
from collections import deque
from dataclasses import dataclass, field, replace

from .clock import WallClock
from .core import (
    AdmittanceParams,
    JoystickState,
    StiffnessProfile,
    recentering_torque,
    step_dynamics,
    total_feedback,
)
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
    encode,
    quantize_state,
)

__all__ = [
    "ServoModel",
    "OperatorInput",
    "operator_torque",
    "Mailbox",
    "TickRecord",
    "RunSummary",
    "ControlLoop",
    "TelemetrySender",
    "FirmwareRuntime",
    "run_control_loop",
]

# Feedback hold policy: hold the last value this long, then ramp it to
# zero over the decay window so a severed host link cannot keep pushing.
FEEDBACK_STALE_AFTER = 0.1  # s
FEEDBACK_DECAY_OVER = 0.2  # s


@dataclass(frozen=True)
class ServoModel:
    """Actuator and sensing limits of the smart servo stand-in."""

    theta_max: float = 1.0  # rad, hard-stop position
    k_stop: float = 1000.0  # N*m/rad, hard-stop spring (>= 100x profile k_max)
    position_quantum: float = 0.0  # rad, encoder resolution; 0 = ideal
    torque_quantum: float = 0.0  # N*m, torque command resolution; 0 = ideal

    def __post_init__(self):
        if not (math.isfinite(self.theta_max) and self.theta_max > 0):
            raise ValueError(f"theta_max must be > 0, got {self.theta_max!r}")
        if not (math.isfinite(self.k_stop) and self.k_stop > 0):
            raise ValueError(f"k_stop must be > 0, got {self.k_stop!r}")
        if self.position_quantum < 0 or self.torque_quantum < 0:
            raise ValueError("quanta must be >= 0")

    def validate_against(self, profile: StiffnessProfile) -> None:
        if self.k_stop < 100.0 * profile.k_max:
            raise ValueError(
                f"k_stop={self.k_stop!r} must be >= 100 * k_max ({100.0 * profile.k_max!r})"
            )

    def quantize_position(self, theta: float) -> float:
        if self.position_quantum <= 0:
            return theta
        return round(theta / self.position_quantum) * self.position_quantum

    def quantize_torque(self, tau: float) -> float:
        if self.torque_quantum <= 0:
            return tau
        return round(tau / self.torque_quantum) * self.torque_quantum

    def hard_stop_torque(self, theta: float) -> float:
        overshoot = abs(theta) - self.theta_max
        if overshoot <= 0:
            return 0.0
        return -self.k_stop * overshoot * math.copysign(1.0, theta)


@dataclass(frozen=True)
class OperatorInput:
    """Scripted operator hand for headless runs.

    ``amplitude`` is the push torque the operator applies to the knob,
    positive toward +theta. Kinds: ``hold`` applies amplitude for the
    whole run; ``step`` from ``start`` to ``stop``; ``sine`` at
    ``frequency`` Hz over the same window; ``chirp`` sweeps 0..frequency
    Hz across a finite window; ``external`` reads the live operator
    mailbox (UI input) instead of the script.
    """

    kind: str = "hold"
    amplitude: float = 0.0  # N*m, push toward +theta
    frequency: float = 0.0  # Hz
    start: float = 0.0  # s
    stop: float = math.inf  # s

    def __post_init__(self):
        if self.kind not in ("step", "sine", "chirp", "hold", "external"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if self.frequency < 0:
            raise ValueError("frequency must be >= 0")
        if self.stop < self.start:
            raise ValueError("stop must be >= start")
        if self.kind == "chirp" and not math.isfinite(self.stop - self.start):
            raise ValueError("chirp needs a finite start..stop window")


def operator_torque(op: OperatorInput, t: float) -> float:
    """Scripted push torque at time t (``external`` evaluates to 0 here)."""
    if op.kind == "hold":
        return op.amplitude
    if t < op.start or t >= op.stop:
        return 0.0
    if op.kind == "step":
        return op.amplitude
    if op.kind == "sine":
        return op.amplitude * math.sin(2.0 * math.pi * op.frequency * (t - op.start))
    if op.kind == "chirp":
        # linear sweep 0 -> frequency over the window
        tau = t - op.start
        rate = op.frequency / (op.stop - op.start)
        return op.amplitude * math.sin(math.pi * rate * tau * tau)
    return 0.0


class Mailbox:
    """Thread-safe holder of the single latest value."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = None
        self._fresh = False

    def post(self, value) -> None:
        with self._lock:
            self._value = value
            self._fresh = True

    def take(self):
        """Return (value, was_fresh) and clear the fresh flag."""
        with self._lock:
            fresh = self._fresh
            self._fresh = False
            return self._value, fresh

    def peek(self):
        with self._lock:
            return self._value


@dataclass(frozen=True)
class TickRecord:
    """Everything one control tick computed, for tracing and tests."""

    state: JoystickState  # true internal state after the step
    sample: JoystickState  # emitted telemetry sample (encoder-quantized theta)
    tau_rec: float
    tau_ext: float  # staleness-scaled external torque actually applied
    tau_fb_total: float  # clamped (and torque-quantized) motor command
    tau_stop: float
    operator_push: float


@dataclass
class RunSummary:
    ticks: int = 0
    overruns: int = 0
    feedback_discarded: int = 0
    config_applied: int = 0
    config_rejected: int = 0
    final_state: JoystickState = field(default_factory=JoystickState)


class ControlLoop:
    """The device's feedback-torque task. Not thread-safe by itself:
    exactly one thread may call tick()/receive(); the mailboxes are the
    concurrent boundary."""

    def __init__(
        self,
        params: AdmittanceParams,
        profile: StiffnessProfile,
        servo: ServoModel,
        operator: OperatorInput,
        initial_state: JoystickState | None = None,
        telemetry_capacity: int = 4096,
    ):
        servo.validate_against(profile)
        self.params = params
        self.profile = profile
        self.servo = servo
        self.operator = operator
        self.state = initial_state or JoystickState()
        self.theta_measured = servo.quantize_position(self.state.theta)

        self.feedback_mailbox = Mailbox()  # float N*m from the host link
        self.operator_mailbox = Mailbox()  # float N*m live push (kind=external)
        self.config_mailbox = Mailbox()  # ConfigSetPayload

        # drop-oldest sample queue toward the telemetry task
        self.telemetry = deque(maxlen=telemetry_capacity)
        self.pending_acks = deque()

        self._rx_parser = StreamParser()
        self._tau_ext_held = 0.0
        self._tau_ext_rx_t = -math.inf  # device time of last good feedback
        self._operator_push = 0.0

        self.ticks = 0
        self.feedback_discarded = 0
        self.config_applied = 0
        self.config_rejected = 0

    # -- host link ---------------------------------------------------------

    def receive(self, data: bytes) -> None:
        """Feed host->device bytes; feedback and config land in mailboxes."""
        for frame in self._rx_parser.feed(data):
            if frame.ftype == FTYPE_FEEDBACK:
                self.feedback_mailbox.post(FeedbackPayload.unpack(frame.payload).tau_ext)
            elif frame.ftype == FTYPE_CONFIG_SET:
                self.config_mailbox.post(ConfigSetPayload.unpack(frame.payload))
            # other frame types are host-bound; ignore them here

    @property
    def rx_diagnostics(self):
        return self._rx_parser.diagnostics

    # -- control tick ------------------------------------------------------

    def tick(self) -> TickRecord:
        self._apply_pending_config()

        value, fresh = self.feedback_mailbox.take()
        if fresh:
            if value is not None and math.isfinite(value):
                self._tau_ext_held = value
                self._tau_ext_rx_t = self.state.t
            else:
                self.feedback_discarded += 1
        tau_ext = self._effective_feedback()

        if self.operator.kind == "external":
            push = self.operator_mailbox.peek()
            if push is None or not math.isfinite(push):
                push = self._operator_push if math.isfinite(self._operator_push) else 0.0
            self._operator_push = push
        else:
            push = operator_torque(self.operator, self.state.t)

        tau_rec = recentering_torque(self.theta_measured, self.profile)
        tau_total = total_feedback(tau_rec, tau_ext, self.params.tau_max)
        tau_total = self.servo.quantize_torque(tau_total)
        tau_stop = self.servo.hard_stop_torque(self.state.theta)

        # the grip sensor sees the reaction to the operator's push
        state = replace(self.state, tau_operator=-push)
        state = step_dynamics(state, tau_total + tau_stop, self.params)
        self.state = state
        self.theta_measured = self.servo.quantize_position(state.theta)

        sample = replace(state, theta=self.theta_measured)
        self.telemetry.append(sample)
        self.ticks += 1
        return TickRecord(
            state=state,
            sample=sample,
            tau_rec=tau_rec,
            tau_ext=tau_ext,
            tau_fb_total=tau_total,
            tau_stop=tau_stop,
            operator_push=push,
        )

    def _effective_feedback(self) -> float:
        age = self.state.t - self._tau_ext_rx_t
        if age <= FEEDBACK_STALE_AFTER:
            return self._tau_ext_held
        fade = 1.0 - (age - FEEDBACK_STALE_AFTER) / FEEDBACK_DECAY_OVER
        if fade <= 0.0:
            return 0.0
        return self._tau_ext_held * fade

    def _apply_pending_config(self) -> None:
        cfg, fresh = self.config_mailbox.take()
        if not fresh or cfg is None:
            return
        try:
            params = AdmittanceParams(
                d_adm=cfg.d_adm, m_adm=cfg.m_adm, tau_max=cfg.tau_max, dt=self.params.dt
            )
            profile = StiffnessProfile(
                theta0=cfg.theta0, q_dz=cfg.q_dz, n=cfg.n, k_min=cfg.k_min, k_max=cfg.k_max
            )
            servo = replace(self.servo, theta_max=cfg.theta_max)
            servo.validate_against(profile)
        except ValueError:
            self.config_rejected += 1
            self.pending_acks.append(ConfigAckPayload(ok=False))
            return
        self.params = params
        self.profile = profile
        self.servo = servo
        self.config_applied += 1
        self.pending_acks.append(ConfigAckPayload(ok=True))


class TelemetrySender:
    """The device's second task: paces state frames onto the transport.

    Pulls the newest sample available at each pace instant (older ones
    are superseded, matching drop-oldest semantics) and never blocks the
    control loop. Config acks jump the queue.
    """

    def __init__(self, loop: ControlLoop, sink, rate: float = 500.0, start_time: float = 0.0):
        if rate <= 0:
            raise ValueError("telemetry rate must be > 0")
        if rate > 1.0 / loop.params.dt + 1e-9:
            raise ValueError("telemetry rate must not exceed the control loop rate")
        self.loop = loop
        self.sink = sink  # callable(bytes) or ByteTransport
        self.period = 1.0 / rate
        self.seq = 0
        self.frames_sent = 0
        self._next_due = start_time + self.period

    def _emit(self, ftype: int, payload: bytes) -> None:
        data = encode(Frame(ftype=ftype, seq=self.seq, payload=payload))
        self.seq = (self.seq + 1) & 0xFF
        write = getattr(self.sink, "write", None)
        if write is not None:
            write(data)
        else:
            self.sink(data)
        self.frames_sent += 1

    def poll(self, now: float) -> int:
        """Send everything due by `now`; returns the number of frames."""
        sent = 0
        while self.loop.pending_acks:
            self._emit(FTYPE_CONFIG_ACK, self.loop.pending_acks.popleft().pack())
            sent += 1
        while self._next_due <= now + 1e-12:
            sample = None
            while self.loop.telemetry:  # take the newest, drop the rest
                sample = self.loop.telemetry.popleft()
            if sample is not None:
                self._emit(FTYPE_TELEMETRY, quantize_state(sample).pack())
                sent += 1
            self._next_due += self.period
        return sent

    @property
    def next_due(self) -> float:
        return self._next_due


def run_control_loop(
    loop: ControlLoop,
    duration: float,
    *,
    feedback: list[tuple[float, float]] | None = None,
    on_tick=None,
) -> RunSummary:
    """Drive the loop deterministically for `duration` seconds of device time.

    `feedback` is an optional list of (t, tau_ext) events delivered to the
    feedback mailbox at their timestamps, emulating the host link without
    a transport. Real-time pacing lives in FirmwareRuntime instead.
    """
    if duration <= 0:
        raise ValueError("duration must be > 0")
    events = deque(sorted(feedback)) if feedback else deque()
    t_end = loop.state.t + duration
    while loop.state.t < t_end - 1e-12:
        while events and events[0][0] <= loop.state.t + 1e-12:
            loop.feedback_mailbox.post(events.popleft()[1])
        record = loop.tick()
        if on_tick is not None:
            on_tick(record)
    return RunSummary(
        ticks=loop.ticks,
        overruns=0,
        feedback_discarded=loop.feedback_discarded,
        config_applied=loop.config_applied,
        config_rejected=loop.config_rejected,
        final_state=loop.state,
    )


class FirmwareRuntime:
    """Two wall-clock threads around a ControlLoop + TelemetrySender.

    The control thread also drains the transport receive side (feedback
    and config frames are inputs to the control task). Ticks whose
    processing exceeds dt are counted as overruns; when the loop falls
    behind schedule it slips its deadline instead of bursting.
    """

    def __init__(
        self,
        loop: ControlLoop,
        transport,
        telemetry_rate: float = 500.0,
        clock: WallClock | None = None,
        on_tick=None,
    ):
        self.loop = loop
        self.transport = transport
        self.clock = clock or WallClock()
        self.sender = TelemetrySender(loop, transport, rate=telemetry_rate)
        self.on_tick = on_tick
        self.overruns = 0
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        t0 = self.clock.now()
        self.sender._next_due = t0 + self.sender.period
        self._threads = [
            threading.Thread(target=self._control_main, args=(t0,), daemon=True, name="fw-control"),
            threading.Thread(target=self._telemetry_main, daemon=True, name="fw-telemetry"),
        ]
        for t in self._threads:
            t.start()

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)

    def _control_main(self, t0: float) -> None:
        dt = self.loop.params.dt
        deadline = t0 + dt
        while not self._stop.is_set():
            start = self.clock.now()
            data = self.transport.read()
            if data:
                self.loop.receive(data)
            record = self.loop.tick()
            if self.on_tick is not None:
                self.on_tick(record)
            end = self.clock.now()
            if end - start > dt:
                self.overruns += 1
            deadline += dt
            if deadline < end:
                deadline = end  # slipped; do not burst to catch up
            self.clock.sleep_until(deadline)

    def _telemetry_main(self) -> None:
        while not self._stop.is_set():
            now = self.clock.now()
            self.sender.poll(now)
            self.clock.sleep_until(self.sender.next_due)
