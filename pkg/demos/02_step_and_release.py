"""
Step response and free release
==============================

Runs two bundled scenarios under the simulated clock and reads the
settled values straight off the trace.
"""

from hatpic.runner import SimulationRun
from hatpic.scenario import bundled_scenarios, load_scenario

paths = {p.stem: p for p in bundled_scenarios()}

# A constant 0.2 N*m push balances the 1.0 N*m/rad plateau spring at
# exactly 0.2 rad, well clear of both the deadzone and the fade region.
result = SimulationRun(load_scenario(paths["freespace"])).run()
print("freespace:")
print(f"  steady theta   {result.summary['steady_state_theta']:.4f} rad (expect 0.200)")
print(f"  peak |tau_fb|  {result.summary['max_abs_tau_fb_total']:.3f} N*m")

# Releasing from 0.2 rad with no operator: the spring unwinds, the knob
# creeps home, and the mechanical energy never goes back up.
result = SimulationRun(load_scenario(paths["release"])).run()
sc = result.scenario
rows = result.rows
energy = [
    0.5 * sc.admittance.d_adm * r.omega**2
    + 0.5 * sc.profile.k_max * (r.theta - sc.profile.theta0) ** 2
    for r in rows
]
rising = sum(1 for a, b in zip(energy, energy[1:]) if b > a)
print("release:")
print(f"  final theta    {rows[-1].theta:.5f} rad (inside the 0.05 deadzone)")
print(f"  energy         {energy[0]:.5f} -> {energy[-1]:.6f} J")
print(f"  rising pairs   {rising} of {len(energy) - 1}")
