"""Software twin of a single-axis force-feedback joystick.

The stack mirrors the real device layering:

- ``core``: admittance dynamics, re-centering stiffness notch, feedback
  clamp, velocity/position reference math (pure functions).
- ``protocol``: framed binary wire format with CRC and a resynchronizing
  stream parser.
- ``firmware``: the device emulator (control-loop task + telemetry task).
- ``transport``: byte links (in-process pipe, TCP, pseudo-terminal).
- ``bridge``: host middleware turning telemetry into bus references and
  robot force into feedback frames; WebSocket mirror for the console.
- ``bus``: newline-delimited-JSON topic bus over TCP.
- ``robot``: virtual 1-DoF robot with a spring-damper wall.
- ``scenario``/``trace``/``runner``/``cli``: TOML scenarios, CSV traces,
  deterministic simulation runs, live stack, the ``hatpicctl`` tool.
"""

from .core import (
    AdmittanceParams,
    JoystickState,
    ReferenceState,
    StiffnessProfile,
    integrate_reference,
    recentering_stiffness,
    recentering_torque,
    step_dynamics,
    total_feedback,
    velocity_reference,
)
from .firmware import ControlLoop, OperatorInput, ServoModel, TelemetrySender, run_control_loop
from .protocol import Frame, FrameError, StreamParser, encode, parse_stream
from .robot import RobotState, WorldConfig, step_robot
from .scenario import Scenario, ScenarioError, load_scenario
from .trace import TraceRow, check_trace, read_trace, write_trace
from .runner import LiveStack, RunResult, SimulationRun

__version__ = "0.1.0"

__all__ = [
    "AdmittanceParams",
    "JoystickState",
    "ReferenceState",
    "StiffnessProfile",
    "integrate_reference",
    "recentering_stiffness",
    "recentering_torque",
    "step_dynamics",
    "total_feedback",
    "velocity_reference",
    "ControlLoop",
    "OperatorInput",
    "ServoModel",
    "TelemetrySender",
    "run_control_loop",
    "Frame",
    "FrameError",
    "StreamParser",
    "encode",
    "parse_stream",
    "RobotState",
    "WorldConfig",
    "step_robot",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "TraceRow",
    "check_trace",
    "read_trace",
    "write_trace",
    "LiveStack",
    "RunResult",
    "SimulationRun",
    "__version__",
]
