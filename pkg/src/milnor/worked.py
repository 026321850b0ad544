"""End-to-end run on the three-variable example f = (x^2 z + y^3 - z, x)."""

from __future__ import annotations

import numpy as np

from .corpus import corpus_germ
from .flows import example1_report
from .germ import evaluate, format_germ, jacobian, validate
from .regularity import d_regularity_check
from .sampling import SamplingPlan
from .search import alpha_grid, alpha_suitability_map
from .tolerances import DEFAULT_TOLERANCES, ToleranceProfile

RAY_NARRATIVE = (
    "A published claim for this germ says Df has rank below 2 at every point (x,0,0) "
    "and that f is therefore not d-regular. Direct evaluation disagrees on both counts: "
    "Df(x,0,0) = [[0,0,x^2-1],[1,0,0]] has rank 2 for |x| < 1, the canonical lift of "
    "the radial vector f(p) is u0 = (x,0,0), and <u0,p> = x^2 > 0, so every sampled "
    "ray point is suitable. The discrepancy is reported here and is not resolved."
)


def example1_pipeline(eta: float = 0.9, eps: float = 0.5, ray_points: int = 25,
                      count: int = 200, grid: int = 21, seed: int = 0,
                      tol: ToleranceProfile = DEFAULT_TOLERANCES) -> dict:
    """Run every stage of the analysis on the worked germ.

    Returns a dict with the germ summary, the closed-form homeomorphism
    measurements, a d-regularity report along the (x,0,0) ray, and the
    alpha-grid suitability rows at a ray point.
    """
    germ = corpus_germ("example1")
    p0 = np.array([0.3, 0.1, -0.2])
    diagnostics = [d.to_dict() for d in validate(germ, tol.rank_tol, seed)]
    homeo = example1_report(eta, count, seed)
    xs = np.linspace(eps / ray_points, eps * (1 - 1 / ray_points), ray_points)
    ray = np.column_stack([xs, np.zeros_like(xs), np.zeros_like(xs)])
    dreg = d_regularity_check(germ, eps, SamplingPlan(seed=seed), tol, points=ray)
    dreg.notes.append(RAY_NARRATIVE)
    p_map = np.array([eps / 2, 0.0, 0.0])
    rows = alpha_suitability_map(germ, p_map, alpha_grid(germ.k, grid), tol)
    return {
        "germ": {"name": germ.name, "source": format_germ(germ), "diagnostics": diagnostics,
                 "point": p0.tolist(), "value": evaluate(germ, p0).tolist(),
                 "jacobian": jacobian(germ, p0).tolist(),
                 "jacobian_at_origin": jacobian(germ, np.zeros(3)).tolist()},
        "homeomorphism": homeo.summary(),
        "ray_report": dreg,
        "alpha_map_point": p_map.tolist(),
        "alpha_map": rows,
        "narrative": [RAY_NARRATIVE, *homeo.notes],
    }
