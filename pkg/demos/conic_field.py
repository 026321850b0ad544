"""
The conic vector field and its homeomorphism
============================================

v_a(y) = y + |y|^2 a bends the radial field. Its flow, run inward from the
sphere of radius eta with time t = |p|^2, turns straight rays into curved
ones and defines a homeomorphism h_a of the ball.
"""

import numpy as np

from milnor import ConicParameter, h_apply, h_invert
from milnor.flows import conic_field, curve_C, field_zeros, nontrivial_zero

cp = ConicParameter((-0.5, -0.5), eta=0.9)

# Inside the unit ball the field always points outward ...
y = np.array([0.3, -0.2])
print("v_a(y) =", conic_field(cp, y), " <v, y> =", conic_field(cp, y) @ y)

# ... and its only other zero lies outside, at -a/|a|^2.
print("nontrivial zero:", nontrivial_zero(cp))
print("zeros found from a grid in B_1:", field_zeros(cp).round(12).tolist())

# One curved ray: samples of the integral curve ending at theta.
theta = np.array([0.9, 0.0])
traj = curve_C(cp, theta, samples=6)
for t, p in zip(traj.t, traj.points):
    print(f"t = {t:.5f}  p = {p.round(6)}  |p|^2 - t = {p @ p - t:+.1e}")
print("largest invariant defect before projection:", traj.max_defect)

# The homeomorphism obeys the norm law |h(x)| = sqrt(eta |x|) and inverts.
x = np.array([0.09, 0.0])
hx = h_apply(cp, x)
print("h(x) =", hx, " |h(x)| =", np.linalg.norm(hx), " sqrt(eta |x|) =", np.sqrt(0.9 * 0.09))
print("round trip error:", np.linalg.norm(h_invert(cp, hx) - x))

# With a = 0 it is the plain radial map sqrt(eta / |x|) x.
h0 = h_apply(ConicParameter((0.0, 0.0), 0.9), x)
print("a = 0:", h0, "closed form:", np.sqrt(0.9 / np.linalg.norm(x)) * x)
