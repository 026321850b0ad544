"""
Suitable parameters for a designed germ
=======================================

g*(x, y) = (2x^2 - x^4 + x^2 y, x^3 - x^2) is built so that at p = (1, 0) the
lift of the radial field is orthogonal to p. The straight rays fail there,
yet almost every bent field works.
"""

import numpy as np

from milnor import corpus_germ, suitability_at
from milnor.regularity import openness_margin
from milnor.search import alpha_grid, alpha_suitability_map

g = corpus_germ("gstar")
p = np.array([1.0, 0.0])

# a = 0: f(p) = (1, 0), Df = [[0, 1], [1, 0]], lift u = (0, 1), <u, p> = 0.
v = suitability_at(g, np.zeros(2), p)
print("a = 0      lift", v.lift, " <u,p> =", v.inner, " ->", v.branch.value)

# Tilting a off the line a_2 = 0 restores a radial component equal to a_2.
for a in [(0.0, 0.1), (0.0, -0.3), (0.4, 0.2)]:
    v = suitability_at(g, a, p)
    print(f"a = {a}  lift {v.lift}  <u,p> = {v.inner:+.3f}  -> {v.branch.value}")

# Over a grid of parameters only the line a_2 = 0 fails.
rows = alpha_suitability_map(g, p, alpha_grid(2, 11))
fails = [r[:2] for r in rows if r[-1] is False]
print(f"{len(fails)} of {len(rows)} grid parameters fail, all with a_2 = 0:",
      all(abs(a2) < 1e-12 for _, a2 in fails))

# Suitability is open: the verdict survives perturbations up to distance |a_2|.
est = openness_margin(g, (0.0, 0.1), p)
print(f"empirical openness radius at a = (0, 0.1): {est.radius:.4f}")
