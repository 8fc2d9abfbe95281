"""hatpicctl: scenario runner, capture inspector, live stack launcher.

Exit codes: 0 clean, 1 replay mismatch or failed trace check, 2 invalid
input (scenario, capture file, arguments), 3 transport or port failure.
Log level comes from the HATPIC_LOG environment variable.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .firmware import OperatorInput
from .protocol import (
    FTYPE_CONFIG_ACK,
    FTYPE_CONFIG_SET,
    FTYPE_FEEDBACK,
    FTYPE_TELEMETRY,
    ConfigAckPayload,
    ConfigSetPayload,
    FeedbackPayload,
    TelemetryPayload,
    dequantize_payload,
    parse_stream,
)
from .runner import LiveStack, SimulationRun
from .scenario import Scenario, ScenarioError, load_scenario, scenario_from_json
from .trace import check_trace, dump_trace, read_trace, strip_volatile
from .transport import TransportError

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INVALID = 2
EXIT_TRANSPORT = 3

log = logging.getLogger("hatpicctl")


def _print_summary(summary: dict, record_path=None) -> None:
    print(f"ticks:                {summary['ticks']} ({summary['duration']:.3f} s)")
    print(f"steady-state theta:   {summary['steady_state_theta']:.6f} rad")
    print(f"max |tau_fb_total|:   {summary['max_abs_tau_fb_total']:.6f} N*m")
    print(f"overruns:             {summary['overruns']}")
    print(f"resyncs:              {summary['resyncs']}")
    print(f"crc failures:         {summary['crc_failures']}")
    if record_path is not None:
        print(f"trace:                {record_path}")


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        if args.transport is not None:
            scenario = replace(
                scenario, bridge=replace(scenario.bridge, device_transport=args.transport)
            )
        if args.duration is not None:
            scenario = replace(scenario, duration=args.duration)
    except ScenarioError as exc:
        print(f"invalid scenario:\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        if args.realtime:
            stack = LiveStack(scenario, record=True, servers=False)
            result = stack.run_for(scenario.duration)
        else:
            result = SimulationRun(scenario).run()
    except ScenarioError as exc:
        print(f"invalid scenario:\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TransportError, OSError) as exc:
        print(f"transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT

    if args.record is not None:
        result.write(args.record)
    _print_summary(result.summary, args.record)
    return EXIT_OK


def _describe_frame(index: int, frame) -> str:
    head = f"[{index:5d}] seq={frame.seq:3d}"
    if frame.ftype == FTYPE_TELEMETRY:
        state = dequantize_payload(TelemetryPayload.unpack(frame.payload))
        return (
            f"{head} telemetry  t={state.t:.6f}s theta={state.theta:+.6f}rad "
            f"omega={state.omega:+.6f}rad/s tau_operator={state.tau_operator:+.6f}N*m"
        )
    if frame.ftype == FTYPE_FEEDBACK:
        fb = FeedbackPayload.unpack(frame.payload)
        return f"{head} feedback   tau_ext={fb.tau_ext:+.6f}N*m"
    if frame.ftype == FTYPE_CONFIG_SET:
        cfg = ConfigSetPayload.unpack(frame.payload)
        return (
            f"{head} config-set d_adm={cfg.d_adm} m_adm={cfg.m_adm} tau_max={cfg.tau_max} "
            f"theta0={cfg.theta0} q_dz={cfg.q_dz} n={cfg.n} k_min={cfg.k_min} "
            f"k_max={cfg.k_max} theta_max={cfg.theta_max}"
        )
    if frame.ftype == FTYPE_CONFIG_ACK:
        ack = ConfigAckPayload.unpack(frame.payload)
        return f"{head} config-ack {'ok' if ack.ok else 'rejected'}"
    return f"{head} type=0x{frame.ftype:02x} payload={frame.payload.hex()}"


def cmd_decode(args) -> int:
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        print(f"cannot read {args.input}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INVALID
    frames, diag = parse_stream(data)
    for i, frame in enumerate(frames):
        print(_describe_frame(i, frame))
    print(
        f"frames: {len(frames)}  resyncs: {diag.resyncs}  crc_failures: {diag.crc_failures}  "
        f"unknown_type: {diag.unknown_type}  truncated: {diag.truncated}"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        if args.config is not None:
            scenario = load_scenario(args.config)
        else:
            scenario = Scenario(name="serve", operator=OperatorInput(kind="external"))
        overrides = {
            key: getattr(args, key)
            for key in (
                "device_transport",
                "bus_listen",
                "ws_listen",
                "http_listen",
                "v_max",
                "publish_rate",
                "feedback_gain",
                "input_deadzone",
                "f_max",
            )
            if getattr(args, key) is not None
        }
        if overrides:
            scenario = replace(scenario, bridge=replace(scenario.bridge, **overrides))
    except ScenarioError as exc:
        print(f"invalid config:\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID

    assets = args.assets
    if assets is None:
        default_assets = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        assets = default_assets if default_assets.is_dir() else None

    try:
        stack = LiveStack(scenario, record=args.record is not None, servers=True, assets_dir=assets)
    except (TransportError, OSError) as exc:
        print(f"cannot start: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except ValueError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID

    stack.start()
    print(f"bus:    tcp://{stack.bus_server.host}:{stack.bus_server.port}")
    print(f"ws:     ws://{stack.ws_hub.host}:{stack.ws_hub.port}")
    if stack.http_server is not None:
        host, port = stack.http_server.server_address[:2]
        print(f"console: http://{host}:{port}/")
    sys.stdout.flush()
    try:
        if args.duration and args.duration > 0:
            time.sleep(args.duration)
        else:
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        stack.stop()
        if args.record is not None:
            stack.result().write(args.record)
            print(f"trace: {args.record}")
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        original = Path(args.record).read_text(encoding="utf-8")
        rows, metadata = read_trace(args.record)
    except OSError as exc:
        print(f"cannot read {args.record}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid trace: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if "scenario" not in metadata:
        print("trace has no embedded scenario metadata; cannot replay", file=sys.stderr)
        return EXIT_INVALID
    try:
        scenario = scenario_from_json(metadata["scenario"])
    except ScenarioError as exc:
        print(f"embedded scenario invalid:\n{exc}", file=sys.stderr)
        return EXIT_INVALID

    result = SimulationRun(scenario).run()
    problems = check_trace(result.rows, scenario.admittance.tau_max)
    if args.out is not None:
        result.write(args.out)

    buf = io.StringIO()
    dump_trace(buf, result.rows, {"name": scenario.name, "scenario": metadata["scenario"]})
    identical = strip_volatile(buf.getvalue()) == strip_volatile(original)

    print(f"rows: {len(result.rows)} (original {len(rows)})")
    for problem in problems[:10]:
        print(f"check: {problem}")
    if identical and not problems:
        print("replay: identical")
        return EXIT_OK
    if not identical:
        print("replay: MISMATCH")
    return EXIT_FAIL


def main(argv=None) -> int:
    level = os.environ.get("HATPIC_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )

    parser = argparse.ArgumentParser(prog="hatpicctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario headlessly and record a trace")
    p_run.add_argument("--scenario", required=True, help="scenario TOML file")
    p_run.add_argument("--record", default=None, help="CSV trace output path")
    p_run.add_argument("--transport", default=None, help="device link: inproc, tcp:host:port, pty")
    p_run.add_argument("--realtime", action="store_true", help="wall clock + threads instead of the simulated clock")
    p_run.add_argument("--duration", type=float, default=None, help="override scenario duration (s)")
    p_run.set_defaults(func=cmd_run)

    p_dec = sub.add_parser("decode", help="pretty-print a captured frame stream")
    p_dec.add_argument("--input", required=True, help="binary capture file")
    p_dec.set_defaults(func=cmd_decode)

    p_srv = sub.add_parser("serve", help="run the live stack (bus + WebSocket + console)")
    p_srv.add_argument("--config", default=None, help="scenario TOML (operator defaults to external)")
    p_srv.add_argument("--device-transport", dest="device_transport", default=None)
    p_srv.add_argument("--bus-listen", dest="bus_listen", default=None)
    p_srv.add_argument("--ws-listen", dest="ws_listen", default=None)
    p_srv.add_argument("--http-listen", dest="http_listen", default=None)
    p_srv.add_argument("--v-max", dest="v_max", type=float, default=None)
    p_srv.add_argument("--publish-rate", dest="publish_rate", type=float, default=None)
    p_srv.add_argument("--feedback-gain", dest="feedback_gain", type=float, default=None)
    p_srv.add_argument("--input-deadzone", dest="input_deadzone", type=float, default=None)
    p_srv.add_argument("--f-max", dest="f_max", type=float, default=None)
    p_srv.add_argument("--assets", default=None, help="operator console static files directory")
    p_srv.add_argument("--record", default=None, help="CSV trace written on shutdown")
    p_srv.add_argument("--duration", type=float, default=0.0, help="stop after this long (0 = until SIGINT)")
    p_srv.set_defaults(func=cmd_serve)

    p_rep = sub.add_parser("replay", help="re-run the scenario embedded in a trace and compare")
    p_rep.add_argument("--record", required=True, help="previously recorded CSV trace")
    p_rep.add_argument("--out", default=None, help="write the replayed trace here")
    p_rep.set_defaults(func=cmd_replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
