"""Suitable parameters and the sampled regularity checks built on them.

Every f-lifting of a target vector v at p is u + w with u the canonical
(minimum-norm) lift and w in ker Df_p. Since u is orthogonal to the kernel,
some lifting has <u', p> != 0 exactly when <u, p> != 0 or the projection
of p onto ker Df_p is nonzero. The two normalized margins

    radial   = <u, p> / (|u| |p|)
    vertical = |proj_ker(p)| / |p|

therefore decide suitability of alpha at p without searching over liftings.
The same pair decides whether the preimage of the curve through f(p)
meets the sphere |x| = |p| transversely, which is what
``sphere_submersion_test`` measures independently from finite differences
of the normalized map.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .flows import ConicParameter, DomainError, h_invert
from .germ import MapGerm, evaluate, value_and_jacobian
from .numkernel import factorize, min_norm_solve, project_onto_kernel
from .sampling import (RNG_ALGORITHM, SamplingPlan, rng, sample_region, sample_sphere)
from .tolerances import DEFAULT_TOLERANCES, ToleranceProfile

SCHEMA_VERSION = "1.0"


class CriticalPoint(ValueError):
    def __init__(self, point, rank, k):
        self.point = np.asarray(point).tolist()
        self.rank = rank
        super().__init__(f"Df has numeric rank {rank} < k = {k} at {self.point}")


class ZeroValue(ValueError):
    pass


class Branch(str, Enum):
    RADIAL = "RadialLift"
    VERTICAL = "VerticalAdjust"
    NOT_SUITABLE = "NotSuitable"


@dataclass
class LiftResult:
    point: np.ndarray
    value: np.ndarray
    jacobian: np.ndarray
    kernel_basis: np.ndarray   # (n, n - k), orthonormal columns
    lift: np.ndarray           # canonical lift u
    vertical: np.ndarray       # projection of p onto ker Df_p


def canonical_lift(germ: MapGerm, p, v, tol: ToleranceProfile = DEFAULT_TOLERANCES
                   ) -> LiftResult:
    p = np.asarray(p, dtype=float)
    fx, J = value_and_jacobian(germ, p)
    fact = factorize(J, tol.rank_tol)
    if fact.rank < germ.k:
        raise CriticalPoint(p, fact.rank, germ.k)
    u = min_norm_solve(J, v, fact=fact)
    w = project_onto_kernel(fact, p)
    return LiftResult(p, fx, J, fact.kernel_basis, u, w)


@dataclass
class SuitabilityVerdict:
    point: np.ndarray
    value: np.ndarray
    alpha: np.ndarray
    lift: np.ndarray           # canonical lift u_a(p) of v_a(f(p))
    vertical: np.ndarray       # proj_ker(p), the best vertical adjustment
    inner: float               # <u_a(p), p>
    margin_radial: float
    margin_vertical: float
    branch: Branch

    @property
    def suitable(self) -> bool:
        return self.branch is not Branch.NOT_SUITABLE

    @property
    def score(self) -> float:
        return max(abs(self.margin_radial), self.margin_vertical)


def _margins(lift: LiftResult) -> tuple[float, float, float]:
    p, u = lift.point, lift.lift
    np_ = float(np.linalg.norm(p))
    nu = float(np.linalg.norm(u))
    inner = float(u @ p)
    radial = inner / (nu * np_) if nu > 0 and np_ > 0 else 0.0
    vertical = float(np.linalg.norm(lift.vertical)) / np_ if np_ > 0 else 0.0
    return inner, radial, vertical


def classify(radial: float, vertical: float, tol: ToleranceProfile) -> Branch:
    if abs(radial) > tol.radial_margin:
        return Branch.RADIAL
    if vertical > tol.vertical_margin:
        return Branch.VERTICAL
    return Branch.NOT_SUITABLE


def suitability_at(germ: MapGerm, alpha, p, tol: ToleranceProfile = DEFAULT_TOLERANCES
                   ) -> SuitabilityVerdict:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (germ.k,):
        raise ValueError(f"alpha must lie in R^{germ.k}")
    if float(alpha @ alpha) >= 1.0:
        raise ValueError("|alpha| must be < 1")
    p = np.asarray(p, dtype=float)
    fx = evaluate(germ, p)
    nf2 = float(fx @ fx)
    if math.sqrt(nf2) <= tol.zero_tol:
        raise ZeroValue(f"|f(p)| = {math.sqrt(nf2):.3e} at {p.tolist()}")
    target = fx + nf2 * alpha
    lift = canonical_lift(germ, p, target, tol)
    inner, radial, vertical = _margins(lift)
    return SuitabilityVerdict(p, fx, alpha, lift.lift, lift.vertical, inner, radial, vertical,
                              classify(radial, vertical, tol))


def fiber_sphere_transverse(germ: MapGerm, p, tol: ToleranceProfile = DEFAULT_TOLERANCES
                            ) -> tuple[bool, float]:
    """Is the fibre through p transverse to the sphere |x| = |p| there?"""
    p = np.asarray(p, dtype=float)
    _, J = value_and_jacobian(germ, p)
    fact = factorize(J, tol.rank_tol)
    if fact.rank < germ.k:
        raise CriticalPoint(p, fact.rank, germ.k)
    margin = float(np.linalg.norm(project_onto_kernel(fact, p))) / float(np.linalg.norm(p))
    return margin > tol.vertical_margin, margin


# ---------------------------------------------------------------------------
# Normalized map and the submersion oracle


def normalized_map(germ: MapGerm, cp: ConicParameter | None, x,
                   tol: ToleranceProfile = DEFAULT_TOLERANCES) -> np.ndarray:
    """f/|f|, or h_a^{-1}(f)/|h_a^{-1}(f)| when a conic parameter is given."""
    fx = evaluate(germ, x)
    nf = float(np.linalg.norm(fx))
    if nf <= tol.zero_tol:
        raise ZeroValue(f"|f(x)| = {nf:.3e}")
    if cp is None:
        return fx / nf
    if nf > cp.eta:
        raise DomainError(f"|f(x)| = {nf} exceeds eta = {cp.eta}")
    y = h_invert(cp, fx, tol)
    return y / float(np.linalg.norm(y))


def _tangent_basis(v: np.ndarray) -> np.ndarray:
    return factorize(v[None, :]).kernel_basis


def sphere_submersion_test(germ: MapGerm, cp: ConicParameter | None, x,
                           tol: ToleranceProfile = DEFAULT_TOLERANCES) -> float:
    """Smallest singular value of the differential of the normalized map
    restricted to the sphere through x, by central differences.

    Tangent directions are retracted back onto the sphere; the difference
    quotients are projected onto the tangent space of S^{k-1} at phi(x).
    """
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    phi0 = normalized_map(germ, cp, x, tol)
    T = _tangent_basis(x)                 # (n, n-1)
    Q = _tangent_basis(phi0)              # (k, k-1)
    h = tol.fd_step * r
    cols = []
    for j in range(T.shape[1]):
        e = T[:, j]
        xp = x + h * e
        xm = x - h * e
        xp *= r / np.linalg.norm(xp)
        xm *= r / np.linalg.norm(xm)
        d = (normalized_map(germ, cp, xp, tol) - normalized_map(germ, cp, xm, tol)) / (2 * h)
        cols.append(Q.T @ d)
    D = np.array(cols).T.reshape(Q.shape[1], T.shape[1])
    if D.shape[0] > D.shape[1]:
        return 0.0
    sv = np.linalg.svd(D, compute_uv=False)
    return float(sv[-1]) if sv.size else 0.0


def oracle_submersion(germ: MapGerm, cp: ConicParameter | None, x,
                      tol: ToleranceProfile = DEFAULT_TOLERANCES) -> tuple[bool, float]:
    """Scale-free oracle verdict: |x| * sigma_min > submersion_floor."""
    rel = sphere_submersion_test(germ, cp, x, tol) * float(np.linalg.norm(x))
    return rel > tol.submersion_floor, rel


# ---------------------------------------------------------------------------
# Openness of suitability in alpha


@dataclass
class OpennessEstimate:
    radius: float
    branch: Branch
    sign: int
    lipschitz: float
    trials: int
    notes: list[str] = field(default_factory=list)


def _same_side(ref: SuitabilityVerdict, v: SuitabilityVerdict, tol: ToleranceProfile) -> bool:
    if v.branch is not ref.branch:
        return False
    if ref.branch is Branch.RADIAL:
        return (np.sign(v.margin_radial) == np.sign(ref.margin_radial)
                and abs(v.margin_radial) > tol.radial_margin / 2)
    if ref.branch is Branch.VERTICAL:
        return v.margin_vertical > tol.vertical_margin / 2
    return False


def _perturbations(alpha: np.ndarray, nu: float, count: int, seed: int, stream: int):
    k = alpha.size
    half = count // 2
    shell = sample_sphere(k, nu, max(half, 1), seed, stream)
    g = rng(seed, stream + 1)
    inner = sample_sphere(k, 1.0, count - half, seed, stream + 2) * \
        (nu * g.random(count - half) ** (1.0 / k))[:, None] if count > half else np.zeros((0, k))
    return alpha + np.vstack([shell, inner])


def margin_lipschitz(germ: MapGerm, alpha, p, radius: float = 1e-3, count: int = 32,
                     seed: int = 0, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> float:
    """Largest |margin(a') - margin(a)| / |a' - a| over sampled |a' - a| <= radius."""
    alpha = np.asarray(alpha, dtype=float)
    ref = suitability_at(germ, alpha, p, tol)
    best = 0.0
    for a2 in _perturbations(alpha, radius, count, seed, 7):
        if a2 @ a2 >= 1.0:
            continue
        v = suitability_at(germ, a2, p, tol)
        d = float(np.linalg.norm(a2 - alpha))
        if d > 0:
            best = max(best, abs(v.margin_radial - ref.margin_radial) / d,
                       abs(v.margin_vertical - ref.margin_vertical) / d)
    return best


def openness_margin(germ: MapGerm, alpha, p, tol: ToleranceProfile = DEFAULT_TOLERANCES,
                    count: int = 64, iters: int = 24, seed: int = 0) -> OpennessEstimate:
    """Empirical radius nu such that sampled a' with |a' - a| <= nu keep the
    suitability branch (and the sign of the radial margin) with margin above
    half its tolerance. Half the draws sit on the boundary sphere, where a
    half-space failure set is first met. Not a certificate.
    """
    alpha = np.asarray(alpha, dtype=float)
    ref = suitability_at(germ, alpha, p, tol)
    if not ref.suitable:
        raise ValueError("alpha is not a suitable parameter at p")
    hi_cap = 1.0 - float(np.linalg.norm(alpha))

    def holds(nu):
        for a2 in _perturbations(alpha, nu, count, seed, 0):
            if a2 @ a2 >= 1.0:
                a2 = a2 * ((1 - 1e-12) / float(np.linalg.norm(a2)))
            try:
                if not _same_side(ref, suitability_at(germ, a2, p, tol), tol):
                    return False
            except (CriticalPoint, ZeroValue):
                return False
        return True

    lo, hi = 0.0, hi_cap
    if holds(hi):
        lo = hi
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if holds(mid):
                lo = mid
            else:
                hi = mid
    lip = margin_lipschitz(germ, alpha, p, tol=tol, seed=seed)
    notes = [] if lo < hi_cap else ["radius reached the boundary of the unit parameter ball"]
    sign = int(np.sign(ref.margin_radial)) if ref.branch is Branch.RADIAL else 0
    return OpennessEstimate(lo, ref.branch, sign, lip, count, notes)


# ---------------------------------------------------------------------------
# Sampled checks


KINDS = ("transversality-property", "d-regular", "d_h-regular")


@dataclass
class RegularityReport:
    germ: str
    kind: str
    epsilon: float
    delta: float | None
    alpha: list[float] | None
    eta: float | None
    tolerance_profile: dict
    samples: list[dict]
    seed: int
    region: str
    plan: dict | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for s in self.samples if s.get("branch") == Branch.NOT_SUITABLE.value)

    @property
    def errors(self) -> int:
        return sum(1 for s in self.samples if "error" in s)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.errors == 0

    @property
    def witnesses(self) -> list[list[float]]:
        return [s["x"] for s in self.samples if s.get("branch") == Branch.NOT_SUITABLE.value]

    def worst(self) -> dict:
        ok = [s for s in self.samples if "error" not in s]
        rad = [abs(s["margin_radial"]) for s in ok if s.get("margin_radial") is not None]
        ver = [s["margin_vertical"] for s in ok if s.get("margin_vertical") is not None]
        score = [max(abs(s["margin_radial"] or 0.0), s["margin_vertical"] or 0.0) for s in ok]
        return {"min_abs_margin_radial": min(rad) if rad else None,
                "min_margin_vertical": min(ver) if ver else None,
                "min_score": min(score) if score else None}

    def to_dict(self) -> dict:
        return {
            "germ": self.germ, "kind": self.kind, "epsilon": self.epsilon,
            "delta": self.delta, "alpha": self.alpha, "eta": self.eta,
            "tolerance_profile": self.tolerance_profile, "region": self.region,
            "samples": self.samples, "pass": self.passed, "failures": self.failures,
            "errors": self.errors, "failure_witnesses": self.witnesses,
            "worst_margins": self.worst(), "seed": self.seed, "plan": self.plan,
            "rng": RNG_ALGORITHM, "notes": list(self.notes), "version": SCHEMA_VERSION,
            "software": f"milnor {__version__}",
        }


def _record(germ: MapGerm, x, alpha, tol: ToleranceProfile, cp_oracle, with_oracle: bool
            ) -> dict:
    x = np.asarray(x, dtype=float)
    rec = {"x": x.tolist(), "radius": float(np.linalg.norm(x))}
    try:
        v = suitability_at(germ, alpha, x, tol)
        rec.update(f_x=v.value.tolist(), inner=v.inner, margin_radial=v.margin_radial,
                   margin_vertical=v.margin_vertical, branch=v.branch.value)
        if with_oracle:
            _, rel = oracle_submersion(germ, cp_oracle, x, tol)
            rec["submersion_sv"] = rel
    except Exception as exc:  # noqa: BLE001 - per-sample errors are data
        rec.setdefault("f_x", evaluate(germ, x).tolist())
        rec.update(branch="Error", error=f"{type(exc).__name__}: {exc}")
    return rec


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def transversality_property_check(germ: MapGerm, eps: float, delta: float,
                                  plan: SamplingPlan = SamplingPlan(),
                                  tol: ToleranceProfile = DEFAULT_TOLERANCES,
                                  workers: int = 1) -> RegularityReport:
    """Fibres inside the solid tube |f| <= delta meet the sphere S_eps transversely."""
    if not (eps > 0 and delta > 0):
        raise ValueError("need eps > 0 and delta > 0")
    cand = sample_sphere(germ.n, eps, plan.count * plan.rejection_budget, plan.seed, 0)
    pts = []
    for x in cand:
        nf = float(np.linalg.norm(evaluate(germ, x)))
        if tol.zero_tol < nf <= delta:
            pts.append(x)
            if len(pts) == plan.count:
                break

    def one(x):
        rec = {"x": x.tolist(), "radius": eps, "f_x": evaluate(germ, x).tolist(),
               "margin_radial": None}
        try:
            ok, margin = fiber_sphere_transverse(germ, x, tol)
            rec.update(margin_vertical=margin,
                       branch="Transverse" if ok else Branch.NOT_SUITABLE.value)
        except CriticalPoint as exc:
            rec.update(margin_vertical=None, branch="Error", error=f"CriticalPoint: {exc}")
        return rec

    samples = _map(one, pts, workers)
    notes = [f"{len(pts)} of {len(cand)} sphere draws fell in the tube "
             f"{tol.zero_tol:g} < |f| <= {delta:g}"]
    if not pts:
        notes.append("no sampled sphere point lies in the tube; the check passes vacuously")
    return RegularityReport(germ.name, "transversality-property", eps, delta, None, None,
                            tol.to_dict(), samples, plan.seed, "sphere-in-solid-tube",
                            plan.to_dict(), notes)


def d_regularity_check(germ: MapGerm, eps: float, plan: SamplingPlan = SamplingPlan(),
                       tol: ToleranceProfile = DEFAULT_TOLERANCES, points: Iterable | None = None,
                       with_oracle: bool = False, workers: int = 1) -> RegularityReport:
    """Suitability of alpha = 0 over B_eps minus f^{-1}(0) (classical d-regularity)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    zero = np.zeros(germ.k)
    notes: list[str] = []
    if points is None:
        rs = sample_region(germ, eps, 0.0, "punctured-ball", plan, tol.zero_tol)
        pts, region, notes = rs.points, "punctured-ball", list(rs.notes)
    else:
        pts = np.asarray(list(points), dtype=float).reshape(-1, germ.n)
        region = "given-points"
    samples = _map(lambda x: _record(germ, x, zero, tol, None, with_oracle), list(pts), workers)
    return RegularityReport(germ.name, "d-regular", eps, None, zero.tolist(), None,
                            tol.to_dict(), samples, plan.seed, region, plan.to_dict(), notes)


def d_h_regularity_check(germ: MapGerm, cp: ConicParameter, eps: float, delta: float,
                         plan: SamplingPlan = SamplingPlan(),
                         tol: ToleranceProfile = DEFAULT_TOLERANCES,
                         points: Iterable | None = None, with_oracle: bool = False,
                         workers: int = 1) -> RegularityReport:
    """Suitability of cp.alpha over B_eps outside the open solid tube |f| < delta."""
    if cp.k != germ.k:
        raise ValueError(f"alpha must lie in R^{germ.k}")
    notes: list[str] = []
    if points is None:
        rs = sample_region(germ, eps, delta, "outside-tube", plan, tol.zero_tol)
        pts, region, notes = rs.points, "outside-tube", list(rs.notes)
    else:
        pts = np.asarray(list(points), dtype=float).reshape(-1, germ.n)
        region = "given-points"
    alpha = cp.a
    samples = _map(lambda x: _record(germ, x, alpha, tol, cp, with_oracle), list(pts), workers)
    big = [s for s in samples if np.linalg.norm(s["f_x"]) > cp.eta]
    if big:
        notes.append(f"{len(big)} sampled points have |f(x)| > eta = {cp.eta}; "
                     "f(B_eps) is not inside B_eta there")
    return RegularityReport(germ.name, "d_h-regular", eps, delta, list(cp.alpha), cp.eta,
                            tol.to_dict(), samples, plan.seed, region, plan.to_dict(), notes)
