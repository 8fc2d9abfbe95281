"""Host middleware: telemetry fanout, reference pacing, force feedback."""

import math
import struct

import pytest

from hatpic.bridge import BridgeConfig, BridgeRuntime, DriverBridge
from hatpic.bus import BusMessage, TopicBus
from hatpic.clock import SimClock
from hatpic.core import JoystickState, integrate_reference, velocity_reference, ReferenceState
from hatpic.firmware import FEEDBACK_DECAY_OVER, FEEDBACK_STALE_AFTER
from hatpic.protocol import (
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
from hatpic.transport import TransportError


def telemetry_bytes(theta, t, seq=0, omega=0.0, tau=0.0):
    payload = quantize_state(JoystickState(theta=theta, omega=omega, tau_operator=tau, t=t))
    return encode(Frame(ftype=FTYPE_TELEMETRY, seq=seq & 0xFF, payload=payload.pack()))


class Harness:
    def __init__(self, **config_kw):
        self.bus = TopicBus()
        self.clock = SimClock()
        self.tx = []  # bytes the bridge sent toward the device
        self.messages = []
        self.bus.subscribe("*", self.messages.append)
        self.bridge = DriverBridge(
            BridgeConfig(**config_kw), self.bus, self.tx.append, now_fn=self.clock.now
        )

    def topic(self, name):
        return [m for m in self.messages if m.topic == name]

    def device_frames(self):
        parser = StreamParser()
        frames = parser.feed(b"".join(self.tx))
        assert parser.diagnostics.resyncs == 0
        return frames


class TestTelemetryFanout:
    def test_joystick_state_republished(self):
        h = Harness()
        h.bridge.handle_device_bytes(telemetry_bytes(0.25, 0.001))
        states = h.topic("joystick/state")
        assert len(states) == 1
        assert states[0].body["theta"] == pytest.approx(0.25, abs=1e-6)
        assert states[0].t == pytest.approx(0.001, abs=1e-6)

    def test_direct_velocity_map(self):
        h = Harness(v_max=2.0)
        h.bridge.handle_device_bytes(telemetry_bytes(0.5, 0.002))
        refs = h.topic("robot/ref")
        assert refs and refs[-1].body["v_ref"] == pytest.approx(0.5, abs=1e-6)

    def test_deadzone_suppression(self):
        h = Harness(input_deadzone=0.05)
        h.bridge.handle_device_bytes(telemetry_bytes(0.03, 0.002))
        refs = h.topic("robot/ref")
        assert refs and refs[-1].body["v_ref"] == 0.0

    def test_linear_slope_is_half_v_max(self):
        h = Harness(v_max=0.4)
        h.bridge.handle_device_bytes(telemetry_bytes(1.5, 0.002))
        refs = h.topic("robot/ref")
        assert refs and refs[-1].body["v_ref"] == pytest.approx(0.5 * 0.4 * 1.5, abs=1e-6)

    def test_ref_paced_by_device_time(self):
        h = Harness(publish_rate=500.0)
        for k in range(1, 101):  # 1 kHz telemetry for 0.1 s of device time
            h.bridge.handle_device_bytes(telemetry_bytes(0.2, k * 0.001, seq=k))
        assert len(h.topic("joystick/state")) == 100
        refs = len(h.topic("robot/ref"))
        assert 49 <= refs <= 51  # 500 Hz ceiling over 0.1 s

    def test_p_ref_integration_matches_core_mirror(self):
        h = Harness(v_max=2.0, input_deadzone=0.05)
        thetas = [0.3 * math.sin(2 * math.pi * 1.3 * k * 0.001) for k in range(1, 201)]
        mirror = ReferenceState(v_ref=0.0, p_ref=0.0, v_max=2.0)
        last_t = 0.0
        for k, theta in enumerate(thetas, start=1):
            raw = telemetry_bytes(theta, k * 0.001, seq=k)
            h.bridge.handle_device_bytes(raw)
            # mirror exactly what the wire delivered, not the pre-quantized value
            from hatpic.protocol import TelemetryPayload, dequantize_payload

            state = dequantize_payload(TelemetryPayload.unpack(raw[6:22]))
            v = velocity_reference(state.theta, 2.0, 0.05)
            mirror = integrate_reference(mirror, v, state.t - last_t)
            last_t = state.t
        assert h.bridge.ref.p_ref == mirror.p_ref  # identical arithmetic, identical bits

    def test_corrupt_bytes_counted_not_fatal(self):
        h = Harness()
        raw = bytearray(telemetry_bytes(0.1, 0.001))
        raw[10] ^= 0x04
        h.bridge.handle_device_bytes(bytes(raw))
        assert h.bridge.parser.diagnostics.crc_failures == 1
        assert h.topic("joystick/state") == []


class TestForceFeedback:
    def test_contact_force_maps_to_torque_frame(self):
        h = Harness(feedback_gain=0.022)
        h.bus.publish(BusMessage(topic="robot/state", t=0.0, body={"f_contact": 10.0}))
        frames = h.device_frames()
        assert len(frames) == 1
        assert frames[0].ftype == FTYPE_FEEDBACK
        assert FeedbackPayload.unpack(frames[0].payload).tau_ext_unm == -220000

    def test_force_clamped_before_gain(self):
        h = Harness(feedback_gain=0.022, f_max=20.0)
        h.bus.publish(BusMessage(topic="robot/state", t=0.0, body={"f_contact": 1000.0}))
        frames = h.device_frames()
        assert FeedbackPayload.unpack(frames[0].payload).tau_ext_unm == -440000

    def test_malformed_robot_state_dropped(self):
        h = Harness()
        h.bus.publish(BusMessage(topic="robot/state", t=0.0, body={"p": 0.1}))
        h.bus.publish(BusMessage(topic="robot/state", t=0.0, body={"f_contact": "much"}))
        assert h.bridge.malformed == 2
        assert h.device_frames() == []

    def test_stale_robot_state_decays_to_zero(self):
        h = Harness(publish_rate=500.0)
        h.bus.publish(BusMessage(topic="robot/state", t=0.0, body={"f_contact": 10.0}))
        taus = []
        # advance host time well past hold + decay, polling as the runtime would
        for _ in range(250):
            h.clock.advance(0.002)
            h.bridge.poll()
        for frame in h.device_frames():
            if frame.ftype == FTYPE_FEEDBACK:
                taus.append(FeedbackPayload.unpack(frame.payload).tau_ext_unm / 1e6)
        assert taus[0] == pytest.approx(-0.22, abs=1e-6)  # immediate echo
        assert taus[-1] == 0.0  # fully decayed
        mags = [abs(t) for t in taus[1:]]
        assert all(b <= a + 1e-9 for a, b in zip(mags, mags[1:]))  # monotone fade

    def test_fresh_force_cancels_decay(self):
        h = Harness(publish_rate=500.0)
        h.bus.publish(BusMessage(topic="robot/state", t=0.0, body={"f_contact": 10.0}))
        h.clock.advance(FEEDBACK_STALE_AFTER + 0.05)
        h.bridge.poll()
        n_during_decay = h.bridge.feedback_tx
        assert n_during_decay > 1
        h.bus.publish(BusMessage(topic="robot/state", t=0.0, body={"f_contact": 5.0}))
        h.clock.advance(0.002)
        h.bridge.poll()  # fresh force, no decay frames expected
        frames = h.device_frames()
        last = FeedbackPayload.unpack(frames[-1].payload)
        assert last.tau_ext_unm == -110000


class TestOperatorParams:
    def test_full_firmware_push(self):
        h = Harness()
        body = dict(d_adm=0.01, m_adm=0.1, tau_max=0.44, theta0=0.0, q_dz=0.05,
                    n=0.3, k_min=0.2, k_max=1.0, theta_max=1.0)
        assert h.bridge.handle_operator_params(body) is True
        frames = h.device_frames()
        assert [f.ftype for f in frames] == [FTYPE_CONFIG_SET]
        cfg = ConfigSetPayload.unpack(frames[0].payload)
        assert cfg.theta_max == pytest.approx(1.0, abs=1e-6)

    def test_partial_firmware_push_rejected(self):
        h = Harness()
        with pytest.raises(ValueError, match="missing keys"):
            h.bridge.handle_operator_params({"d_adm": 0.02})
        assert h.device_frames() == []

    def test_host_only_edit_acks_locally(self):
        h = Harness(v_max=2.0)
        assert h.bridge.handle_operator_params({"v_max": 1.5}) is False
        assert h.bridge.config.v_max == 1.5
        assert h.bridge.ref.v_max == 1.5
        acks = [m for m in h.topic("bridge/diag") if m.body.get("event") == "config_ack"]
        assert acks and acks[0].body["ok"] is True
        assert h.bridge.acks_rx == 0  # synthesized ack is not a device ack
        assert h.device_frames() == []

    def test_invalid_host_param_raises(self):
        h = Harness()
        with pytest.raises(ValueError):
            h.bridge.handle_operator_params({"v_max": -1.0})
        with pytest.raises(ValueError):
            h.bridge.handle_operator_params({"input_deadzone": math.nan})

    def test_device_ack_surfaces_on_bus_and_hook(self):
        h = Harness()
        seen = []
        h.bridge.on_config_ack = seen.append
        raw = encode(Frame(ftype=FTYPE_CONFIG_ACK, seq=0, payload=ConfigAckPayload(ok=False).pack()))
        h.bridge.handle_device_bytes(raw)
        assert h.bridge.acks_rx == 1
        assert seen == [False]
        events = [m for m in h.topic("bridge/diag") if m.body.get("event") == "config_ack"]
        assert events and events[0].body["ok"] is False


class TestDiagnostics:
    def test_counters_and_extra_merge(self):
        h = Harness()
        h.bridge.extra_diag = lambda: {"ticks": 123, "overruns": 0}
        h.bridge.handle_device_bytes(telemetry_bytes(0.1, 0.001))
        h.bridge.publish_diag()
        diag = h.topic("bridge/diag")[-1].body
        assert diag["frames_rx"] == 1
        assert diag["ticks"] == 123
        assert diag["overruns"] == 0

    def test_poll_emits_diag_at_one_hertz(self):
        h = Harness()
        for _ in range(2500):
            h.clock.advance(0.001)
            h.bridge.poll()
        diags = [m for m in h.topic("bridge/diag") if "frames_rx" in m.body]
        assert len(diags) == 3  # t = 0.001 (first poll), 1.001, 2.001


class TestBridgeRuntime:
    def test_link_loss_zeroes_reference(self):
        class DeadTransport:
            def read(self, max_bytes=65536):
                raise TransportError("serial line unplugged")

        h = Harness()
        h.bridge.ref = ReferenceState(v_ref=0.7, p_ref=0.3, v_max=2.0)
        rt = BridgeRuntime(h.bridge, DeadTransport())
        rt.start()
        rt.stop()
        assert h.bridge.link_lost == 1
        assert h.bridge.ref.v_ref == 0.0
        assert h.bridge.ref.p_ref == 0.3  # position memory survives
        events = [m for m in h.topic("bridge/diag") if m.body.get("event") == "device_link_lost"]
        assert len(events) == 1


class TestReplayTransparency:
    def test_identical_bytes_produce_identical_outputs(self):
        def run():
            h = Harness()
            for k in range(1, 301):
                theta = 0.4 * math.sin(2 * math.pi * 0.9 * k * 0.001)
                h.bridge.handle_device_bytes(telemetry_bytes(theta, k * 0.001, seq=k))
                if k % 7 == 0:
                    h.bus.publish(BusMessage(
                        topic="robot/state", t=k * 0.001,
                        body={"f_contact": 3.0 + (k % 5)},
                    ))
            refs = [(m.t, m.body["v_ref"], m.body["p_ref"]) for m in h.topic("robot/ref")]
            return refs, b"".join(h.tx)

        assert run() == run()
