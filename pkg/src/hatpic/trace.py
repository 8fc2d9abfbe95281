"""CSV trace recording: one row per control tick, '#' metadata header.

Floats are written with repr() so a re-run under the simulated clock
reproduces the file byte-for-byte. Only the `# generated:` line differs
between runs and comparisons must skip it.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass
from datetime import datetime, timezone

__all__ = [
    "TraceRow",
    "TRACE_COLUMNS",
    "dump_trace",
    "write_trace",
    "read_trace",
    "check_trace",
    "strip_volatile",
]

TRACE_COLUMNS = (
    "t",
    "theta",
    "omega",
    "tau_operator",
    "tau_fb_rec",
    "tau_fb_ext",
    "tau_fb_total",
    "v_ref",
    "p_ref",
    "p",
    "f_contact",
)


@dataclass(frozen=True)
class TraceRow:
    t: float  # s
    theta: float  # rad
    omega: float  # rad/s
    tau_operator: float  # N*m
    tau_fb_rec: float  # N*m
    tau_fb_ext: float  # N*m
    tau_fb_total: float  # N*m
    v_ref: float  # m/s
    p_ref: float  # m
    p: float  # m
    f_contact: float  # N


def _fmt(x: float) -> str:
    return repr(float(x))


def dump_trace(fh, rows, metadata: dict | None = None) -> None:
    """Write rows to a text stream; metadata keys become '# key: value' lines."""
    fh.write("# hatpic-trace: 1\n")
    fh.write(f"# generated: {datetime.now(timezone.utc).isoformat()}\n")
    for key in sorted(metadata or {}):
        value = (metadata or {})[key]
        fh.write(f"# {key}: {value}\n")
    fh.write(",".join(TRACE_COLUMNS) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(v) for v in astuple(row)) + "\n")


def write_trace(path, rows, metadata: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        dump_trace(fh, rows, metadata)


def read_trace(path) -> tuple[list[TraceRow], dict]:
    """Read a trace; returns (rows, metadata). Raises ValueError on bad files."""
    rows: list[TraceRow] = []
    metadata: dict = {}
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                text = line[1:].strip()
                key, sep, value = text.partition(":")
                if sep:
                    metadata[key.strip()] = value.strip()
                continue
            if not header_seen:
                if tuple(line.split(",")) != TRACE_COLUMNS:
                    raise ValueError(f"{path}:{lineno}: unexpected column header {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != len(TRACE_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(parts)}")
            try:
                rows.append(TraceRow(*(float(p) for p in parts)))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not header_seen:
        raise ValueError(f"{path}: missing column header")
    return rows, metadata


def strip_volatile(text: str) -> str:
    """Drop the generated-timestamp line so two traces can be compared."""
    return "".join(
        line for line in text.splitlines(keepends=True) if not line.startswith("# generated:")
    )


def check_trace(rows, tau_max: float, tol: float = 1e-9) -> list[str]:
    """Offline consistency check; returns a list of violation messages.

    Enforced per row: the recorded total feedback equals the clamped sum
    of its recentering and external parts, the total stays inside the
    actuator ceiling, timestamps strictly increase, and every field is
    finite.
    """
    problems: list[str] = []
    last_t = -math.inf
    for i, row in enumerate(rows):
        values = astuple(row)
        if not all(math.isfinite(v) for v in values):
            problems.append(f"row {i}: non-finite value")
            continue
        if row.t <= last_t:
            problems.append(f"row {i}: t={row.t} not increasing (prev {last_t})")
        last_t = row.t
        expect = min(max(row.tau_fb_rec + row.tau_fb_ext, -tau_max), tau_max)
        if abs(row.tau_fb_total - expect) > tol:
            problems.append(
                f"row {i}: tau_fb_total={row.tau_fb_total} != clamp(rec+ext)={expect}"
            )
        if abs(row.tau_fb_total) > tau_max + tol:
            problems.append(f"row {i}: |tau_fb_total|={abs(row.tau_fb_total)} exceeds {tau_max}")
    return problems
