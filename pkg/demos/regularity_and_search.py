"""
Sampled regularity checks and the search for omega
===================================================

The pointwise suitability predicate is compared with a finite-difference
test of the normalized map, then every germ of the corpus is searched for
a ball of parameters that are suitable at all sampled points.
"""

from milnor import ConicParameter, corpus_germ, d_h_regularity_check, d_regularity_check
from milnor.corpus import NAMES
from milnor.regularity import transversality_property_check
from milnor.sampling import SamplingPlan
from milnor.search import NoOmegaFound, omega_search
from milnor.tolerances import ToleranceProfile

plan = SamplingPlan(seed=7, count=50)
squaring = corpus_germ("squaring")

# Straight rays for complex squaring, with the oracle recorded for each point.
rep = d_regularity_check(squaring, 0.5, plan, with_oracle=True)
worst = rep.worst()
print(f"squaring: pass={rep.passed}, {len(rep.samples)} samples, worst margins {worst}")
print("smallest oracle value:", min(s["submersion_sv"] for s in rep.samples))

# Curved rays need the target tube kept below eta.
cp = ConicParameter((0.2, -0.1), 0.9)
rep = d_h_regularity_check(squaring, cp, 0.5, 0.05, plan)
print(f"squaring with a = {cp.alpha}: pass={rep.passed}")

# The fibres near the zero set meet the sphere transversely.
rep = transversality_property_check(corpus_germ("projection"), 0.5, 0.05, plan)
print("projection transversality:", rep.passed, rep.notes)

# A radius omega of uniformly suitable parameters, germ by germ.
for name in NAMES:
    res = omega_search(corpus_germ(name), 0.5, 0.05, plan, n_alphas=32)
    print(f"{name:10s} omega = {res.omega:.3f}  witnesses = {len(res.failure_witnesses)}")

# Demanding near-radial lifts everywhere makes the search fail; witnesses are kept.
try:
    omega_search(corpus_germ("gstar"), 0.5, 0.05, plan, ToleranceProfile(radial_margin=0.99))
except NoOmegaFound as exc:
    w = exc.result.failure_witnesses[0]
    print("no omega:", exc, "\nfirst witness:", w["alpha"], w["x"], w["branch"])
