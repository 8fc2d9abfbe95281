"""
Feel the notch: the re-centering stiffness profile
==================================================

Sweeps the knob across its travel and prints the stiffness and torque
the operator would feel at each deflection. The three regimes are easy
to spot: dead flat around center, the stiff plateau that makes idle
palpable, then the fade toward the rim.
"""

from hatpic.core import StiffnessProfile, recentering_stiffness, recentering_torque

profile = StiffnessProfile()  # theta0=0, q_dz=0.05, n=0.3, k_min=0.2, k_max=1.0

print(f"{'theta':>8}  {'K':>6}  {'torque':>8}  profile")
for i in range(0, 61):
    theta = i * 0.015
    k = recentering_stiffness(theta, profile)
    tau = recentering_torque(theta, profile)
    bar = "#" * round(k * 40)
    print(f"{theta:8.3f}  {k:6.3f}  {tau:8.4f}  {bar}")

# The jump at q_dz is intentional: stiffness snaps from 0 to k_max the
# moment the knob leaves the deadzone, so the operator feels a crisp
# edge rather than a mushy ramp. The outer boundary at n is continuous.
eps = 1e-9
print()
print("edge of deadzone:", recentering_stiffness(profile.q_dz - eps, profile), "->",
      recentering_stiffness(profile.q_dz, profile))
print("edge of plateau: ", recentering_stiffness(profile.n - eps, profile), "->",
      recentering_stiffness(profile.n + eps, profile))
