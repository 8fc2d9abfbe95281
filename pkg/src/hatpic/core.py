"""Admittance-control math for the single-axis joystick.

Everything in here is a pure function of its inputs: no I/O, no clocks,
no retained state. The firmware emulator, host bridge and simulation
runner all call into this module; they own time, transport and policy.

Sign convention: positive theta is the knob deflected toward the
operator's "right". ``tau_operator`` is the interaction torque measured
at the grip, positive when the device pushes the operator -- an operator
pushing the knob toward +theta therefore registers a *negative*
tau_operator (reaction torque). The admittance relation integrated by
:func:`step_dynamics` is

    d_adm * domega/dt + m_adm * omega = -tau_operator + tau_fb_total
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "JoystickState",
    "AdmittanceParams",
    "StiffnessProfile",
    "ReferenceState",
    "recentering_stiffness",
    "recentering_torque",
    "total_feedback",
    "step_dynamics",
    "velocity_reference",
    "integrate_reference",
]

# Human tactile bandwidth is roughly 400 Hz; the control step must not be
# coarser than that.
MAX_CONTROL_DT = 1.0 / 400.0


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class JoystickState:
    """One sample of the device: pose, rate, grip torque and time."""

    theta: float = 0.0  # rad, knob deflection from idle
    omega: float = 0.0  # rad/s
    tau_operator: float = 0.0  # N*m, measured interaction torque at the grip
    t: float = 0.0  # s

    def __post_init__(self):
        for name in ("theta", "omega", "tau_operator", "t"):
            _require_finite(name, getattr(self, name))


@dataclass(frozen=True)
class AdmittanceParams:
    """Coefficients of the admittance filter plus actuator/loop limits."""

    d_adm: float = 0.01  # N*m*s^2/rad, inertia coefficient
    m_adm: float = 0.1  # N*m*s/rad, damping coefficient
    tau_max: float = 0.44  # N*m, actuator torque ceiling
    dt: float = 0.001  # s, control step (loop rate 1/dt)

    def __post_init__(self):
        if not (math.isfinite(self.d_adm) and self.d_adm > 0):
            raise ValueError(f"d_adm must be > 0, got {self.d_adm!r}")
        if not (math.isfinite(self.m_adm) and self.m_adm > 0):
            raise ValueError(f"m_adm must be > 0, got {self.m_adm!r}")
        if not (math.isfinite(self.tau_max) and self.tau_max > 0):
            raise ValueError(f"tau_max must be > 0, got {self.tau_max!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if self.dt > MAX_CONTROL_DT:
            raise ValueError(
                f"dt={self.dt!r} exceeds {MAX_CONTROL_DT:.6f} s (loop rate below 400 Hz)"
            )


@dataclass(frozen=True)
class StiffnessProfile:
    """Re-centering gain profile: deadzone, notch plateau, fade-out.

    The gain is zero inside the deadzone, jumps to k_max across the notch
    band (so the operator can feel the idle position), then fades linearly
    back toward k_min beyond the notch range.
    """

    theta0: float = 0.0  # rad, center position
    q_dz: float = 0.05  # rad, deadzone half-width
    n: float = 0.3  # rad, notch range (plateau outer edge)
    k_min: float = 0.2  # N*m/rad
    k_max: float = 1.0  # N*m/rad

    def __post_init__(self):
        for name in ("theta0", "q_dz", "n", "k_min", "k_max"):
            _require_finite(name, getattr(self, name))
        if not 0 <= self.q_dz < self.n:
            raise ValueError(f"need 0 <= q_dz < n, got q_dz={self.q_dz!r} n={self.n!r}")
        if not 0 <= self.k_min <= self.k_max:
            raise ValueError(
                f"need 0 <= k_min <= k_max, got k_min={self.k_min!r} k_max={self.k_max!r}"
            )


@dataclass(frozen=True)
class ReferenceState:
    """Velocity/position reference streamed to the robot.

    p_ref is the running trapezoidal integral of v_ref. While the knob
    stays within its travel, |v_ref| <= (v_max/2) * theta_max.
    """

    v_ref: float = 0.0  # m/s
    p_ref: float = 0.0  # m
    v_max: float = 2.0  # m/s, operator preference

    def __post_init__(self):
        for name in ("v_ref", "p_ref"):
            _require_finite(name, getattr(self, name))
        if not (math.isfinite(self.v_max) and self.v_max > 0):
            raise ValueError(f"v_max must be > 0, got {self.v_max!r}")


def recentering_stiffness(theta: float, profile: StiffnessProfile) -> float:
    """Dynamic re-centering gain at deflection ``theta``.

    Three regimes by distance d = |theta - theta0|:
      d <  q_dz          -> 0 (deadzone)
      q_dz <= d <= n     -> k_max (notch plateau)
      d >  n             -> k_min + (k_max - k_min) * (1 - (d - n)/n),
                            clamped below at k_min

    The fade branch equals k_max at d = n (continuous there) and would go
    negative past d = 2n; negative stiffness is destabilizing, hence the
    k_min floor. The jump from 0 to k_max at d = q_dz is intentional --
    that edge is what the operator feels as the notch.
    """
    _require_finite("theta", theta)
    d = abs(theta - profile.theta0)
    if d < profile.q_dz:
        return 0.0
    if d <= profile.n:
        return profile.k_max
    k_t = profile.k_min + (profile.k_max - profile.k_min) * (1.0 - (d - profile.n) / profile.n)
    return max(k_t, profile.k_min)


def recentering_torque(theta: float, profile: StiffnessProfile) -> float:
    """Spring torque pulling the knob back toward idle: -K(theta) * theta."""
    return -recentering_stiffness(theta, profile) * theta


def total_feedback(tau_rec: float, tau_ext: float, tau_max: float) -> float:
    """Sum of re-centering and external feedback torque, clamped to the
    actuator ceiling. The clamp is applied once, here, after the sum --
    it models the single physical motor limit."""
    total = tau_rec + tau_ext
    if total > tau_max:
        return tau_max
    if total < -tau_max:
        return -tau_max
    return total


def step_dynamics(
    state: JoystickState, tau_fb_total: float, params: AdmittanceParams
) -> JoystickState:
    """Advance the admittance dynamics by one step of params.dt.

    Semi-implicit Euler: the velocity update is implicit in the damping
    term, which keeps the step unconditionally stable for this first-order
    omega dynamics,

        omega' = (d_adm * omega + dt * (-tau_operator + tau_fb_total))
                 / (d_adm + dt * m_adm)
        theta' = theta + dt * omega'
    """
    _require_finite("tau_fb_total", tau_fb_total)
    dt = params.dt
    drive = -state.tau_operator + tau_fb_total
    omega = (params.d_adm * state.omega + dt * drive) / (params.d_adm + dt * params.m_adm)
    return replace(
        state,
        theta=state.theta + dt * omega,
        omega=omega,
        t=state.t + dt,
    )


def velocity_reference(theta: float, v_max: float, input_deadzone: float = 0.0) -> float:
    """Map knob deflection to a commanded robot velocity, (v_max/2) * theta.

    Deflections smaller than ``input_deadzone`` command zero velocity so
    sensor noise at center cannot drift the integrated position reference.
    Pass 0 to disable and get the plain linear map.
    """
    if abs(theta) < input_deadzone:
        return 0.0
    return 0.5 * v_max * theta


def integrate_reference(ref: ReferenceState, v_new: float, dt: float) -> ReferenceState:
    """Fold a new velocity sample into the reference.

    Trapezoidal update, exact for piecewise-linear velocity:
    p_ref += dt * (v_ref + v_new) / 2, then v_ref = v_new.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    return ReferenceState(
        v_ref=v_new,
        p_ref=ref.p_ref + dt * 0.5 * (ref.v_ref + v_new),
        v_max=ref.v_max,
    )
