"""Dataframe codec and resynchronizing parser for the device<->host link.

Frame layout (see docs/protocol.md for the normative v1 description):

    0xAA 0x55 | version | ftype | seq | len | payload[len] | crc16 LE

The CRC is CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection,
no final xor) over version..payload. Payload fields are little-endian
fixed-point micro-units -- no floats cross the wire, so encodings are
bit-identical across platforms and cheap to parse on a microcontroller.

The stream parser accepts arbitrary garbage: any violation discards
exactly one byte and rescans, so it always makes progress and recovers
frames that overlap corrupted sync patterns. Nothing is ever raised for
bad input; everything lands in :class:`ParserDiagnostics`.
"""

from __future__ import annotations

import binascii
import math
import struct
from dataclasses import dataclass, field

__all__ = [
    "SYNC0",
    "SYNC1",
    "PROTOCOL_VERSION",
    "FTYPE_TELEMETRY",
    "FTYPE_FEEDBACK",
    "FTYPE_CONFIG_SET",
    "FTYPE_CONFIG_ACK",
    "PAYLOAD_SIZES",
    "FrameError",
    "Frame",
    "TelemetryPayload",
    "FeedbackPayload",
    "ConfigSetPayload",
    "ConfigAckPayload",
    "crc16",
    "encode",
    "ParserDiagnostics",
    "StreamParser",
    "parse_stream",
    "quantize_state",
    "dequantize_payload",
]

SYNC0 = 0xAA
SYNC1 = 0x55
PROTOCOL_VERSION = 0x01

FTYPE_TELEMETRY = 0x01
FTYPE_FEEDBACK = 0x02
FTYPE_CONFIG_SET = 0x03
FTYPE_CONFIG_ACK = 0x04

# Fixed payload size per frame type; the length byte must match exactly.
PAYLOAD_SIZES = {
    FTYPE_TELEMETRY: 16,
    FTYPE_FEEDBACK: 4,
    FTYPE_CONFIG_SET: 40,
    FTYPE_CONFIG_ACK: 1,
}

MAX_PAYLOAD = 64  # schema rule; bounds parser memory
HEADER_LEN = 6  # sync0 sync1 version ftype seq len
OVERHEAD = HEADER_LEN + 2  # + crc16

MICRO = 1_000_000
_I32_MIN = -(2**31)
_I32_MAX = 2**31 - 1


class FrameError(ValueError):
    """A frame violates the v1 schema and cannot be encoded."""


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE (check value over b'123456789' is 0x29B1)."""
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class Frame:
    """One validated dataframe. Construction enforces the schema."""

    ftype: int
    seq: int
    payload: bytes
    version: int = PROTOCOL_VERSION

    def __post_init__(self):
        if self.version != PROTOCOL_VERSION:
            raise FrameError(f"unsupported version 0x{self.version:02x}")
        if self.ftype not in PAYLOAD_SIZES:
            raise FrameError(f"unknown frame type 0x{self.ftype:02x}")
        if not 0 <= self.seq <= 0xFF:
            raise FrameError(f"seq out of range: {self.seq}")
        expected = PAYLOAD_SIZES[self.ftype]
        if len(self.payload) != expected:
            raise FrameError(
                f"type 0x{self.ftype:02x} payload must be {expected} B, got {len(self.payload)}"
            )


def encode(frame: Frame) -> bytes:
    """Serialize a frame; emits either the complete byte string or nothing."""
    if len(frame.payload) > MAX_PAYLOAD:
        raise FrameError(f"payload exceeds {MAX_PAYLOAD} B")
    body = bytes([frame.version, frame.ftype, frame.seq, len(frame.payload)]) + frame.payload
    return bytes([SYNC0, SYNC1]) + body + struct.pack("<H", crc16(body))


@dataclass
class ParserDiagnostics:
    """Counters of everything the parser swallowed instead of raising."""

    resyncs: int = 0  # bytes discarded hunting for a valid frame
    crc_failures: int = 0
    unknown_type: int = 0
    truncated: int = 0  # partial frame pending at end of capture

    def as_dict(self) -> dict:
        return {
            "resyncs": self.resyncs,
            "crc_failures": self.crc_failures,
            "unknown_type": self.unknown_type,
            "truncated": self.truncated,
        }


class StreamParser:
    """Incremental frame extractor; one instance per byte stream.

    feed() returns the frames completed by the new bytes. The result is
    independent of how the stream is chunked: incomplete candidates are
    buffered until they can be either emitted or rejected.
    """

    def __init__(self):
        self._buf = bytearray()
        self.diagnostics = ParserDiagnostics()

    def feed(self, data: bytes) -> list[Frame]:
        buf = self._buf
        buf.extend(data)
        frames: list[Frame] = []
        diag = self.diagnostics
        pos = 0
        n = len(buf)
        while pos < n:
            if buf[pos] != SYNC0:
                pos += 1
                diag.resyncs += 1
                continue
            avail = n - pos
            if avail < 2:
                break
            if buf[pos + 1] != SYNC1:
                pos += 1
                diag.resyncs += 1
                continue
            if avail < HEADER_LEN:
                break
            version = buf[pos + 2]
            ftype = buf[pos + 3]
            seq = buf[pos + 4]
            length = buf[pos + 5]
            if version != PROTOCOL_VERSION:
                pos += 1
                diag.resyncs += 1
                continue
            if ftype not in PAYLOAD_SIZES:
                diag.unknown_type += 1
                pos += 1
                diag.resyncs += 1
                continue
            if length != PAYLOAD_SIZES[ftype]:
                pos += 1
                diag.resyncs += 1
                continue
            total = OVERHEAD + length
            if avail < total:
                break
            body = bytes(buf[pos + 2 : pos + HEADER_LEN + length])
            crc_rx = buf[pos + HEADER_LEN + length] | (buf[pos + HEADER_LEN + length + 1] << 8)
            if crc16(body) != crc_rx:
                diag.crc_failures += 1
                pos += 1
                diag.resyncs += 1
                continue
            frames.append(Frame(ftype=ftype, seq=seq, payload=body[4:]))
            pos += total
        del buf[:pos]
        return frames

    def finalize(self) -> None:
        """Mark end of stream; a pending partial frame counts as truncated."""
        if self._buf:
            self.diagnostics.truncated += 1
            self._buf.clear()

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)


def parse_stream(data: bytes) -> tuple[list[Frame], ParserDiagnostics]:
    """One-shot parse of a complete capture (finalizes the parser)."""
    parser = StreamParser()
    frames = parser.feed(data)
    parser.finalize()
    return frames, parser.diagnostics


# --- payload codecs -------------------------------------------------------

_TELEMETRY_STRUCT = struct.Struct("<iiiI")
_FEEDBACK_STRUCT = struct.Struct("<i")
_CONFIG_STRUCT = struct.Struct("<10i")


@dataclass(frozen=True)
class TelemetryPayload:
    """On-wire image of a joystick sample, micro-units, little-endian."""

    theta_urad: int
    omega_urad_s: int
    tau_unm: int
    t_us: int  # wraps at 2**32 microseconds
    saturated: bool = field(default=False, compare=False)  # not on the wire

    def pack(self) -> bytes:
        return _TELEMETRY_STRUCT.pack(self.theta_urad, self.omega_urad_s, self.tau_unm, self.t_us)

    @classmethod
    def unpack(cls, raw: bytes) -> "TelemetryPayload":
        theta, omega, tau, t_us = _TELEMETRY_STRUCT.unpack(raw)
        return cls(theta, omega, tau, t_us)


@dataclass(frozen=True)
class FeedbackPayload:
    """External feedback torque pushed host -> device."""

    tau_ext_unm: int

    def pack(self) -> bytes:
        return _FEEDBACK_STRUCT.pack(self.tau_ext_unm)

    @classmethod
    def unpack(cls, raw: bytes) -> "FeedbackPayload":
        return cls(_FEEDBACK_STRUCT.unpack(raw)[0])

    @property
    def tau_ext(self) -> float:
        return self.tau_ext_unm / MICRO


@dataclass(frozen=True)
class ConfigSetPayload:
    """Host-pushed controller parameters, SI floats quantized to micro-units.

    Field 10 on the wire is reserved and must encode as zero.
    """

    d_adm: float
    m_adm: float
    tau_max: float
    theta0: float
    q_dz: float
    n: float
    k_min: float
    k_max: float
    theta_max: float

    def pack(self) -> bytes:
        vals = [
            _quantize(self.d_adm),
            _quantize(self.m_adm),
            _quantize(self.tau_max),
            _quantize(self.theta0),
            _quantize(self.q_dz),
            _quantize(self.n),
            _quantize(self.k_min),
            _quantize(self.k_max),
            _quantize(self.theta_max),
            0,
        ]
        return _CONFIG_STRUCT.pack(*vals)

    @classmethod
    def unpack(cls, raw: bytes) -> "ConfigSetPayload":
        vals = _CONFIG_STRUCT.unpack(raw)
        return cls(*(v / MICRO for v in vals[:9]))


@dataclass(frozen=True)
class ConfigAckPayload:
    """Device's accept/reject answer to a config-set."""

    ok: bool

    def pack(self) -> bytes:
        return b"\x00" if self.ok else b"\x01"

    @classmethod
    def unpack(cls, raw: bytes) -> "ConfigAckPayload":
        return cls(ok=(raw[0] == 0))


def _quantize(value: float) -> int:
    """Round-to-nearest-even scaling by 1e6, saturating at the i32 range."""
    scaled = round(value * MICRO)
    if scaled < _I32_MIN:
        return _I32_MIN
    if scaled > _I32_MAX:
        return _I32_MAX
    return scaled


def quantize_state(state) -> TelemetryPayload:
    """Build the telemetry wire image of a joystick state.

    theta/omega/tau saturate at the i32 micro-unit range (flagged via
    ``saturated``); the timestamp wraps modulo 2**32 microseconds instead.
    """
    theta = round(state.theta * MICRO)
    omega = round(state.omega * MICRO)
    tau = round(state.tau_operator * MICRO)
    saturated = not all(_I32_MIN <= v <= _I32_MAX for v in (theta, omega, tau))
    return TelemetryPayload(
        theta_urad=min(max(theta, _I32_MIN), _I32_MAX),
        omega_urad_s=min(max(omega, _I32_MIN), _I32_MAX),
        tau_unm=min(max(tau, _I32_MIN), _I32_MAX),
        t_us=round(state.t * MICRO) % 2**32,
        saturated=saturated,
    )


def dequantize_payload(p: TelemetryPayload):
    """Inverse of :func:`quantize_state`, exact up to half a micro-unit."""
    from .core import JoystickState

    if not all(math.isfinite(v) for v in (p.theta_urad, p.omega_urad_s, p.tau_unm)):
        raise ValueError("telemetry payload fields must be finite")
    return JoystickState(
        theta=p.theta_urad / MICRO,
        omega=p.omega_urad_s / MICRO,
        tau_operator=p.tau_unm / MICRO,
        t=p.t_us / MICRO,
    )
