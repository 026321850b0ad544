"""
Fibres and preimages of curved rays
===================================

Fibres are found by Gauss-Newton from random starts; one-dimensional fibres
can also be traced by a predictor-corrector walk. The preimage of a curved
ray is checked for transversality to the spheres it crosses.
"""

import numpy as np

from milnor import ConicParameter, corpus_germ
from milnor.fibers import (curve_tangent, e_theta_sample, e_theta_tangency, fiber_points,
                           fiber_walk, milnor_tube_sample)

ex = corpus_germ("example1")

# Points of one fibre inside B_0.5.
fs = fiber_points(ex, [0.01, 0.02], eps=0.5, count=30, seed=1)
print(f"fibre over (0.01, 0.02): {len(fs.points)} points, max residual {fs.residuals.max():.1e}")

# Walking along it from one of them.
walk = fiber_walk(ex, fs.points[0], steps=20, step_size=0.02, eps=0.5, seed=1)
print(f"walk: {len(walk.points)} points, spread {np.ptp(walk.points, axis=0).round(3)}")

# The tube over the circle |c| = 0.05 for complex squaring: two preimages each.
tube = milnor_tube_sample(corpus_germ("squaring"), eps=0.5, delta=0.05, n_values=4, count=20)
print("points per fibre of the squaring tube:", [len(f.points) for f in tube])

# A curved ray and its preimage; tangency scores well above zero mean transverse.
cp = ConicParameter((0.1, 0.2), 0.9)
theta = np.array([0.9, 0.0])
es = e_theta_sample(ex, cp, theta, eps=0.5, n_curve=4, count=10, seed=2)
scores = []
for t, fib in zip(es.t, es.fibers):
    c = curve_tangent(cp, theta, float(t))
    scores += [e_theta_tangency(ex, cp, theta, x, tangent=c).score for x in fib.points]
print(f"E_theta: {len(scores)} points, smallest tangency score {min(scores):.3f}")
