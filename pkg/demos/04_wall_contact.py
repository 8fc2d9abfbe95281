"""
Pushing the robot into a wall
=============================

The full bilateral loop on the simulated clock: the operator pushes the
knob, the reference drives the robot into a wall 0.2 m out, the contact
force comes back through the bridge as feedback torque. Prints the force
balance the run settles into and where the torque clamp engaged.
"""

from hatpic.runner import SimulationRun
from hatpic.scenario import bundled_scenarios, load_scenario

path = next(p for p in bundled_scenarios() if p.stem == "wall")
sc = load_scenario(path)
rows = SimulationRun(sc).run().rows

tail = rows[len(rows) * 9 // 10 :]
f_ss = sum(r.f_contact for r in tail) / len(tail)
p_ss = sum(r.p for r in tail) / len(tail)
p_ref_ss = sum(r.p_ref for r in tail) / len(tail)
felt = -sum(r.tau_fb_ext for r in tail) / len(tail)
saturated = sum(1 for r in rows if abs(r.tau_fb_total) == sc.admittance.tau_max)

gain = sc.bridge.feedback_gain
push = sc.operator.amplitude
print(f"wall at {sc.world.wall_position} m, push {push} N*m, gain {gain} N*m/N")
print()
print(f"  penetration   p  = {p_ss:.4f} m ({(p_ss - sc.world.wall_position) * 1000:.1f} mm in)")
print(f"  reference     p* = {p_ref_ss:.4f} m (leaning on the wall)")
print(f"  contact force f  = {f_ss:.2f} N   (push/gain = {push / gain:.2f})")
print(f"  felt torque      = {felt:.4f} N*m (gain*f = {gain * f_ss:.4f})")
print(f"  clamp engaged on {saturated} of {len(rows)} ticks (impact transient)")

# At rest the coupling spring and the wall spring carry the same force,
# so with equal stiffness the robot parks exactly halfway between the
# reference and the wall face.
mid = (p_ref_ss + sc.world.wall_position) / 2
print(f"  halfway check    = {mid:.4f} m vs p = {p_ss:.4f} m")
