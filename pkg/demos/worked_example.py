"""
The three-variable worked example
=================================

f(x, y, z) = (x^2 z + y^3 - z, x) comes with a closed-form conic
homeomorphism and a published claim that it is not d-regular. The pipeline
below measures both instead of taking them on trust.
"""

from milnor.worked import example1_pipeline

res = example1_pipeline(eta=0.9, eps=0.5, count=100, grid=11, seed=0)

germ = res["germ"]
print("germ:", germ["source"].replace("\n", "  "))
print("f(0.3, 0.1, -0.2) =", germ["value"])
print("Df at the origin =", germ["jacobian_at_origin"])

# The printed homeomorphism, evaluated verbatim.
homeo = res["homeomorphism"]
print(f"round trip: max {homeo['roundtrip_max']:.2e}, median {homeo['roundtrip_median']:.2e}")
print(f"branches agree on {homeo['overlap_agree_fraction']:.0%} of overlap points")

# Straight rays along (x, 0, 0).
ray = res["ray_report"]
print(f"ray check pass={ray.passed} over {len(ray.samples)} points; worst {ray.worst()}")

# Parameters at one ray point.
bad = sum(r[-1] is not True for r in res["alpha_map"])
print(f"alpha grid at {res['alpha_map_point']}: {bad} of {len(res['alpha_map'])} fail")

print()
for line in res["narrative"]:
    print("-", line)
