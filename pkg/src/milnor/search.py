"""Sampled search for a ball of suitable parameters and alpha-grid maps."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .germ import MapGerm, value_and_jacobian
from .numkernel import factorize, project_onto_kernel
from .regularity import (SCHEMA_VERSION, CriticalPoint, suitability_at,
                         transversality_property_check)
from .sampling import RNG_ALGORITHM, SamplingPlan, sample_ball, sample_region
from .tolerances import DEFAULT_TOLERANCES, ToleranceProfile

ALPHA_STREAM = 1000


@dataclass
class OmegaSearchResult:
    germ: str
    omega: float
    found: bool
    epsilon: float
    delta: float
    alphas_tested: int
    points_tested: int
    candidates: list[dict]          # {"omega", "failures"} in the order tested
    failure_witnesses: list[dict]   # {"omega", "alpha", "x", margins, branch}
    seed: int
    plan: dict
    tolerance_profile: dict
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "germ": self.germ, "omega": self.omega, "found": self.found,
            "epsilon": self.epsilon, "delta": self.delta,
            "alphas_tested": self.alphas_tested, "points_tested": self.points_tested,
            "candidates": self.candidates, "failure_witnesses": self.failure_witnesses,
            "seed": self.seed, "plan": self.plan, "tolerance_profile": self.tolerance_profile,
            "rng": RNG_ALGORITHM, "notes": list(self.notes), "version": SCHEMA_VERSION,
            "software": f"milnor {__version__}",
        }


class NoOmegaFound(RuntimeError):
    def __init__(self, result: OmegaSearchResult):
        self.result = result
        super().__init__(f"every candidate radius produced NotSuitable verdicts "
                         f"({len(result.failure_witnesses)} witnesses retained)")


@dataclass
class _PointData:
    x: np.ndarray
    fx: np.ndarray
    u0: np.ndarray      # canonical lift of f(x)
    pinv: np.ndarray    # (n, k) pseudo-inverse of Df
    vertical: float     # |proj_ker x| / |x|


def _prepare(germ: MapGerm, x: np.ndarray, tol: ToleranceProfile) -> _PointData:
    fx, J = value_and_jacobian(germ, x)
    fact = factorize(J, tol.rank_tol)
    if fact.rank < germ.k:
        raise CriticalPoint(x, fact.rank, germ.k)
    pinv = np.column_stack([fact.pinv_apply(e) for e in np.eye(germ.k)])
    vert = float(np.linalg.norm(project_onto_kernel(fact, x))) / float(np.linalg.norm(x))
    return _PointData(x, fx, pinv @ fx, pinv, vert)


def _failing_alphas(pd: _PointData, alphas: np.ndarray, tol: ToleranceProfile) -> np.ndarray:
    # The lift is affine in alpha: u_a = u_0 + |f|^2 Df^+ a.
    if pd.vertical > tol.vertical_margin:
        return np.zeros(len(alphas), dtype=bool)
    U = pd.u0[None, :] + float(pd.fx @ pd.fx) * alphas @ pd.pinv.T
    nu = np.linalg.norm(U, axis=1)
    nx = float(np.linalg.norm(pd.x))
    inner = U @ pd.x
    radial = np.where(nu > 0, inner / np.where(nu > 0, nu, 1.0) / nx, 0.0)
    return np.abs(radial) <= tol.radial_margin


def omega_search(germ: MapGerm, eps: float, delta: float, plan: SamplingPlan = SamplingPlan(),
                 tol: ToleranceProfile = DEFAULT_TOLERANCES, n_alphas: int = 64,
                 iters: int = 10, omega_max: float = 0.999, max_witnesses: int = 50,
                 workers: int = 1) -> OmegaSearchResult:
    """Largest sampled radius omega such that every drawn alpha in B_omega is
    suitable at every drawn point outside the open solid tube.

    The same unit-ball alpha draws are rescaled for every candidate, and the
    point set is fixed, so the search is a bisection on a single sample.
    """
    if not 0 < omega_max < 1:
        raise ValueError("omega_max must lie in (0, 1)")
    region = sample_region(germ, eps, delta, "outside-tube", plan, tol.zero_tol)
    pts = region.points
    unit = sample_ball(germ.k, 1.0, n_alphas, plan.seed, ALPHA_STREAM)
    notes = list(region.notes)
    tp = transversality_property_check(germ, eps, delta, plan, tol)
    notes.append("transversality property on the sampled sphere: "
                 + ("pass" if tp.passed else f"fail ({tp.failures} witnesses)")
                 + ("" if tp.samples else " (vacuous)"))

    def prep(x):
        try:
            return _prepare(germ, x, tol)
        except CriticalPoint:
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            data = list(ex.map(prep, pts))
    else:
        data = [prep(x) for x in pts]
    skipped = sum(d is None for d in data)
    if skipped:
        notes.append(f"{skipped} sampled points are numerically critical and were skipped")
    data = [d for d in data if d is not None]

    candidates, witnesses = [], []

    def test(omega):
        alphas = omega * unit
        fails = []
        for pd in data:
            # Vectorized screen, then confirm with the scalar predicate.
            for j in np.nonzero(_failing_alphas(pd, alphas, tol))[0]:
                v = suitability_at(germ, alphas[j], pd.x, tol)
                if not v.suitable:
                    fails.append((alphas[j], v))
        candidates.append({"omega": omega, "failures": len(fails)})
        for a, v in fails[:max_witnesses]:
            witnesses.append({"omega": omega, "alpha": a.tolist(), "x": v.point.tolist(),
                              "margin_radial": v.margin_radial,
                              "margin_vertical": v.margin_vertical, "branch": v.branch.value})
        return not fails

    lo, hi = 0.0, omega_max
    if test(hi):
        lo = hi
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if test(mid):
                lo = mid
            else:
                hi = mid
    result = OmegaSearchResult(germ.name, lo, lo > 0, eps, delta, n_alphas, len(data),
                               candidates, witnesses, plan.seed, plan.to_dict(),
                               tol.to_dict(), notes)
    if lo == 0.0:
        result.notes.append("no candidate radius was free of NotSuitable verdicts")
        raise NoOmegaFound(result)
    return result


# ---------------------------------------------------------------------------
# alpha grids


def alpha_grid(k: int, n: int, radius: float = 0.95) -> np.ndarray:
    """Regular grid of [-radius, radius]^k restricted to the open unit ball."""
    if not 0 < radius < 1 or n < 1:
        raise ValueError("need 0 < radius < 1 and n >= 1")
    axis = np.linspace(-radius, radius, n) if n > 1 else np.zeros(1)
    mesh = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
    return mesh[np.einsum("ij,ij->i", mesh, mesh) < 1.0]


def alpha_suitability_map(germ: MapGerm, p, alphas: np.ndarray,
                          tol: ToleranceProfile = DEFAULT_TOLERANCES) -> list[tuple]:
    """Rows (alpha_1..alpha_k, margin_radial, margin_vertical, suitable)."""
    rows = []
    for a in np.asarray(alphas, dtype=float):
        try:
            v = suitability_at(germ, a, p, tol)
            rows.append((*a.tolist(), v.margin_radial, v.margin_vertical, v.suitable))
        except (CriticalPoint, ValueError) as exc:
            rows.append((*a.tolist(), None, None, f"error: {type(exc).__name__}"))
    return rows


def alpha_map_header(k: int) -> list[str]:
    return [f"alpha{i + 1}" for i in range(k)] + ["margin_radial", "margin_vertical", "suitable"]

