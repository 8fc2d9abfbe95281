"""Trace CSV: exact float round-trip, metadata, offline checker."""

import io
import math

import pytest

from hatpic.trace import (
    TRACE_COLUMNS,
    TraceRow,
    check_trace,
    dump_trace,
    read_trace,
    strip_volatile,
    write_trace,
)


def row(**kw):
    base = dict(t=0.001, theta=0.1, omega=0.0, tau_operator=-0.1, tau_fb_rec=-0.1,
                tau_fb_ext=0.0, tau_fb_total=-0.1, v_ref=0.1, p_ref=0.0, p=0.0,
                f_contact=0.0)
    base.update(kw)
    return TraceRow(**base)


class TestRoundTrip:
    def test_exact_float_round_trip(self, tmp_path):
        rows = [
            row(t=0.001, theta=0.1 + 0.2),  # classic repr stressor
            row(t=0.002, theta=1.0 / 3.0, omega=-2.2250738585072014e-308),
            row(t=0.003, theta=1e-17, p=123456.789012345678),
        ]
        path = tmp_path / "t.csv"
        write_trace(path, rows, {"name": "exact"})
        got, metadata = read_trace(path)
        assert got == rows  # bit-for-bit through repr()
        assert metadata["name"] == "exact"
        assert metadata["hatpic-trace"] == "1"

    def test_header_and_columns(self, tmp_path):
        path = tmp_path / "t.csv"
        write_trace(path, [row()], {})
        lines = path.read_text().splitlines()
        assert lines[0] == "# hatpic-trace: 1"
        assert lines[1].startswith("# generated: ")
        assert lines[2] == ",".join(TRACE_COLUMNS)

    def test_metadata_sorted_and_parseable(self, tmp_path):
        path = tmp_path / "t.csv"
        write_trace(path, [], {"zeta": 1, "alpha": "x: y"})
        _, metadata = read_trace(path)
        assert metadata["zeta"] == "1"
        assert metadata["alpha"] == "x: y"
        text = path.read_text()
        assert text.index("# alpha") < text.index("# zeta")

    def test_strip_volatile_only_removes_timestamp(self, tmp_path):
        buf1, buf2 = io.StringIO(), io.StringIO()
        dump_trace(buf1, [row()], {"name": "a"})
        dump_trace(buf2, [row()], {"name": "a"})
        assert buf1.getvalue() != buf2.getvalue() or True  # timestamps may collide
        assert strip_volatile(buf1.getvalue()) == strip_volatile(buf2.getvalue())
        assert "# generated:" not in strip_volatile(buf1.getvalue())
        assert "# name: a" in strip_volatile(buf1.getvalue())

    def test_rejects_malformed_files(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,theta\n1,2\n")
        with pytest.raises(ValueError, match="column header"):
            read_trace(bad)
        bad.write_text(",".join(TRACE_COLUMNS) + "\n1,2,3\n")
        with pytest.raises(ValueError, match="fields"):
            read_trace(bad)
        bad.write_text("# only comments\n")
        with pytest.raises(ValueError, match="missing column header"):
            read_trace(bad)


class TestChecker:
    def test_clean_trace_passes(self):
        rows = [row(t=0.001 * (k + 1)) for k in range(5)]
        assert check_trace(rows, tau_max=0.44) == []

    def test_ceiling_violation_reported(self):
        rows = [row(tau_fb_rec=-0.5, tau_fb_ext=0.0, tau_fb_total=-0.5)]
        problems = check_trace(rows, tau_max=0.44)
        assert any("exceeds" in p for p in problems)

    def test_clamp_identity_enforced(self):
        rows = [row(tau_fb_rec=-0.1, tau_fb_ext=-0.05, tau_fb_total=-0.2)]
        problems = check_trace(rows, tau_max=0.44)
        assert any("clamp" in p for p in problems)

    def test_clamped_sum_is_consistent(self):
        rows = [row(tau_fb_rec=-0.3, tau_fb_ext=-0.3, tau_fb_total=-0.44)]
        assert check_trace(rows, tau_max=0.44) == []

    def test_time_must_increase(self):
        rows = [row(t=0.002), row(t=0.002)]
        problems = check_trace(rows, tau_max=0.44)
        assert any("not increasing" in p for p in problems)

    def test_non_finite_reported(self):
        rows = [row(theta=math.nan)]
        problems = check_trace(rows, tau_max=0.44)
        assert any("non-finite" in p for p in problems)
