"""Independent reference implementations for cross-checking the package.

Everything here is deliberately written from the documented laws, not by
importing the code under test: a bitwise CRC, a brute-force explicit
integrator, the piecewise stiffness law, and scalar force-balance
solvers. Tests compare package output against these.
"""

from __future__ import annotations

import math


def crc16_ccitt_false(data: bytes) -> int:
    """Bit-at-a-time CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF,
    no reflection, no final xor. Check value for b'123456789' is 0x29B1."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


def stiffness_law(theta: float, theta0: float, q_dz: float, n: float, k_min: float, k_max: float) -> float:
    """The documented re-centering stiffness: zero inside the deadzone,
    k_max on the notch plateau, then a linear fade floored at k_min."""
    d = abs(theta - theta0)
    if d < q_dz:
        return 0.0
    if d <= n:
        return k_max
    k = k_min + (k_max - k_min) * (1.0 - (d - n) / n)
    return k if k > k_min else k_min


def clamp(x: float, limit: float) -> float:
    return -limit if x < -limit else (limit if x > limit else x)


def simulate_explicit(
    *,
    push: float,
    d_adm: float,
    m_adm: float,
    tau_max: float,
    stiffness_args: tuple,
    tau_ext: float = 0.0,
    theta_init: float = 0.0,
    omega_init: float = 0.0,
    duration: float = 1.0,
    dt: float = 1e-6,
    sample_dt: float = 1e-3,
):
    """Brute-force explicit-Euler run of the admittance + stiffness loop.

    Returns [(t, theta)] samples every sample_dt. The operator push enters
    as tau = -push (reaction at the grip); feedback torque is the clamped
    sum of the re-centering torque and tau_ext.
    """
    theta, omega = theta_init, omega_init
    steps = round(duration / dt)
    every = round(sample_dt / dt)
    out = [(0.0, theta)]
    for i in range(1, steps + 1):
        k = stiffness_law(theta, *stiffness_args)
        tau_fb = clamp(-k * theta + tau_ext, tau_max)
        domega = (push + tau_fb - m_adm * omega) / d_adm
        theta += dt * omega
        omega += dt * domega
        if i % every == 0:
            out.append((i * dt, theta))
    return out


def steady_theta_on_plateau(push: float, q_dz: float, n: float, k_max: float) -> float:
    """Solve push = K(theta)*theta by bisection on the plateau branch."""
    lo, hi = q_dz, n
    f = lambda th: k_max * th - push
    if f(lo) > 0 or f(hi) < 0:
        raise ValueError("push does not balance on the plateau")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def wall_balance(p_ref: float, wall: float, k_wall: float, k_virtual: float) -> tuple[float, float]:
    """Static contact balance by bisection: find p in [wall, p_ref] where
    the wall force k_wall*(p-wall) equals the tracker spring force
    k_virtual*(p_ref-p). Returns (p, f)."""
    if p_ref <= wall:
        return p_ref, 0.0
    g = lambda p: k_wall * (p - wall) - k_virtual * (p_ref - p)
    lo, hi = wall, p_ref
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    p = 0.5 * (lo + hi)
    return p, k_wall * (p - wall)


def trapezoid(ts: list[float], vs: list[float]) -> float:
    """Trapezoidal integral of v(t) over the sample points."""
    assert len(ts) == len(vs)
    total = 0.0
    for i in range(1, len(ts)):
        total += 0.5 * (vs[i] + vs[i - 1]) * (ts[i] - ts[i - 1])
    return total


def i32_saturate(x: int) -> int:
    return max(-(2**31), min(2**31 - 1, x))


def quantize_micro(value: float) -> int:
    """Round-half-even fixed-point micro-unit encoding with i32 saturation."""
    scaled = value * 1e6
    return i32_saturate(round(scaled))
