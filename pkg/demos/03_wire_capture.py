"""
Reading a dirty wire capture
============================

Builds a short device-link capture by hand -- two good frames with line
noise between them and a third frame cut off mid-payload -- then lets
the stream parser sort it out.
"""

from hatpic.core import JoystickState
from hatpic.protocol import (
    FTYPE_FEEDBACK,
    Frame,
    FeedbackPayload,
    StreamParser,
    encode,
    quantize_state,
)

telemetry = Frame(
    ftype=0x01,
    seq=7,
    payload=quantize_state(JoystickState(theta=0.18, omega=-0.35, tau_operator=-0.2, t=1.5)).pack(),
)
feedback = Frame(ftype=FTYPE_FEEDBACK, seq=8, payload=FeedbackPayload(tau_ext_unm=-299695).pack())

capture = (
    b"\x00\xaaGARBAGE"          # noise, including a lone sync byte
    + encode(telemetry)
    + b"\xaa\x55\x01"           # a frame start that never finishes
    + encode(feedback)
    + encode(telemetry)[:10]    # truncated tail
)

print(f"capture: {len(capture)} bytes")
print(capture.hex(" "))
print()

parser = StreamParser()
frames = []
# Feed it in 5-byte chunks to show chunking doesn't matter.
for i in range(0, len(capture), 5):
    frames.extend(parser.feed(capture[i : i + 5]))
parser.finalize()

for f in frames:
    print(f"frame type=0x{f.ftype:02x} seq={f.seq} payload={f.payload.hex()}")
print("diagnostics:", parser.diagnostics.as_dict())
