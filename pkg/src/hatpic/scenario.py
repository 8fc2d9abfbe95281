"""Scenario files: versioned TOML descriptions of a complete closed-loop run.

A scenario bundles every tunable of the stack (admittance parameters,
stiffness profile, servo model, operator script, world, bridge) plus the
run duration and seed. Validation reports every bad field at once with
its dotted path, e.g. ``admittance.d_adm: must be > 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import tomli

from .bridge import BridgeConfig
from .core import AdmittanceParams, StiffnessProfile
from .firmware import OperatorInput, ServoModel
from .robot import WorldConfig

__all__ = [
    "SCHEMA_VERSION",
    "Scenario",
    "ScenarioError",
    "bundled_scenarios",
    "load_scenario",
    "parse_scenario",
    "scenario_to_json",
    "scenario_from_json",
]

SCHEMA_VERSION = 1

# table name -> (attribute on Scenario, dataclass)
_SECTIONS = {
    "admittance": ("admittance", AdmittanceParams),
    "stiffness": ("profile", StiffnessProfile),
    "servo": ("servo", ServoModel),
    "operator": ("operator", OperatorInput),
    "world": ("world", WorldConfig),
    "bridge": ("bridge", BridgeConfig),
}

_TOP_LEVEL_KEYS = {"schema", "name", "duration", "seed", "telemetry_rate", "initial_theta"}


class ScenarioError(ValueError):
    """Validation failure; ``problems`` lists one message per bad field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    duration: float = 5.0  # s
    seed: int = 0  # reserved for randomized operator scripts
    telemetry_rate: float = 500.0  # Hz, device -> host
    initial_theta: float = 0.0  # rad, deflection the run starts from
    admittance: AdmittanceParams = field(default_factory=AdmittanceParams)
    profile: StiffnessProfile = field(default_factory=StiffnessProfile)
    servo: ServoModel = field(default_factory=ServoModel)
    operator: OperatorInput = field(default_factory=OperatorInput)
    world: WorldConfig = field(default_factory=WorldConfig)
    bridge: BridgeConfig = field(default_factory=BridgeConfig)

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"duration must be > 0, got {self.duration!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not (math.isfinite(self.telemetry_rate) and self.telemetry_rate > 0):
            raise ValueError(f"telemetry_rate must be > 0, got {self.telemetry_rate!r}")
        if not math.isfinite(self.initial_theta):
            raise ValueError(f"initial_theta must be finite, got {self.initial_theta!r}")
        if abs(self.initial_theta) > self.servo.theta_max:
            raise ValueError(
                f"initial_theta {self.initial_theta!r} lies beyond the hard stop "
                f"({self.servo.theta_max!r})"
            )
        if self.telemetry_rate > 1.0 / self.admittance.dt + 1e-9:
            raise ValueError(
                f"telemetry_rate {self.telemetry_rate} exceeds control rate {1.0 / self.admittance.dt:.0f}"
            )
        self.servo.validate_against(self.profile)


def _cast(value, ftype, path, problems):
    if ftype is float:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            problems.append(f"{path}: expected a number, got {value!r}")
            return None
        if isinstance(value, str):
            if value.strip().lower() in ("inf", "+inf", "infinity"):
                return math.inf
            problems.append(f"{path}: expected a number, got {value!r}")
            return None
        return float(value)
    if ftype is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{path}: expected an integer, got {value!r}")
            return None
        return value
    if ftype is str:
        if not isinstance(value, str):
            problems.append(f"{path}: expected a string, got {value!r}")
            return None
        return value
    return value


def _build_section(cls, table, prefix, problems):
    known = {f.name: f.type for f in fields(cls)}
    kwargs = {}
    for key, raw in table.items():
        if key not in known:
            problems.append(f"{prefix}.{key}: unknown key")
            continue
        ftype = {"float": float, "int": int, "str": str}.get(known[key], None)
        value = _cast(raw, ftype, f"{prefix}.{key}", problems)
        if value is not None:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        problems.append(f"{prefix}: {exc}")
        return None


def parse_scenario(data: dict, source: str = "<scenario>") -> Scenario:
    """Build a Scenario from a parsed TOML tree; raises ScenarioError."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ScenarioError([f"{source}: top level must be a table"])
    schema = data.get("schema")
    if schema != SCHEMA_VERSION:
        problems.append(f"schema: expected {SCHEMA_VERSION}, got {schema!r}")

    top: dict = {}
    for key in ("name",):
        if key in data:
            value = _cast(data[key], str, key, problems)
            if value is not None:
                top[key] = value
    for key in ("duration", "telemetry_rate", "initial_theta"):
        if key in data:
            value = _cast(data[key], float, key, problems)
            if value is not None:
                top[key] = value
    if "seed" in data:
        value = _cast(data["seed"], int, "seed", problems)
        if value is not None:
            top["seed"] = value

    sections = {}
    for key, value in data.items():
        if key in _TOP_LEVEL_KEYS:
            continue
        if key not in _SECTIONS:
            problems.append(f"{key}: unknown table")
            continue
        if not isinstance(value, dict):
            problems.append(f"{key}: expected a table")
            continue
        attr, cls = _SECTIONS[key]
        built = _build_section(cls, value, key, problems)
        if built is not None:
            sections[attr] = built

    if problems:
        raise ScenarioError(problems)
    try:
        return Scenario(**top, **sections)
    except ValueError as exc:
        raise ScenarioError([str(exc)]) from None


def bundled_scenarios():
    """Paths of the scenario files shipped with the package, sorted by name."""
    from pathlib import Path

    return sorted((Path(__file__).parent / "scenarios").glob("*.toml"))


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario TOML file."""
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ScenarioError([f"{path}: {exc.strerror or exc}"]) from None
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError([f"{path}: {exc}"]) from None
    return parse_scenario(data, source=str(path))


def _encode_floats(obj):
    if isinstance(obj, dict):
        return {k: _encode_floats(v) for k, v in obj.items()}
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def scenario_to_json(scenario: Scenario) -> str:
    """Canonical single-line JSON form, embeddable in trace metadata."""
    tree = {"schema": SCHEMA_VERSION}
    tree["name"] = scenario.name
    tree["duration"] = scenario.duration
    tree["seed"] = scenario.seed
    tree["telemetry_rate"] = scenario.telemetry_rate
    tree["initial_theta"] = scenario.initial_theta
    for table, (attr, _) in _SECTIONS.items():
        tree[table] = asdict(getattr(scenario, attr))
    return json.dumps(_encode_floats(tree), sort_keys=True, separators=(",", ":"))


def scenario_from_json(text: str) -> Scenario:
    """Inverse of scenario_to_json; validates like a freshly loaded file."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"embedded scenario: {exc}"]) from None
    return parse_scenario(data, source="<embedded>")
