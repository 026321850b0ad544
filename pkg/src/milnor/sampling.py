"""Seeded sampling of spheres and of regions around the Milnor tube.

Every random draw comes from a numpy ``PCG64`` stream derived from
``SeedSequence(seed, spawn_key=(stream,))``. Streams are assigned before
any work is scheduled, so results do not depend on how many workers run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .germ import MapGerm, evaluate, value_and_jacobian

RNG_ALGORITHM = f"numpy.random.PCG64 via SeedSequence(seed, spawn_key=(stream,)), numpy {np.__version__}"

REGION_MODES = ("tube-boundary", "outside-tube", "punctured-ball")


class RejectionBudgetExhausted(RuntimeError):
    def __init__(self, mode, accepted, requested, drawn):
        self.mode = mode
        self.accepted = accepted
        self.requested = requested
        self.drawn = drawn
        self.acceptance_rate = accepted / drawn if drawn else 0.0
        super().__init__(f"{mode}: accepted {accepted}/{requested} after {drawn} draws "
                         f"(acceptance rate {self.acceptance_rate:.2e})")


@dataclass(frozen=True)
class SamplingPlan:
    seed: int = 0
    count: int = 200             # points per radius stratum
    radii: tuple[float, ...] = ()  # empty: derived from eps by strata()
    n_strata: int = 4
    rejection_budget: int = 200  # draws allowed per requested point

    def __post_init__(self):
        if self.count < 1 or self.n_strata < 1 or self.rejection_budget < 1:
            raise ValueError("counts must be >= 1")
        if any(r <= 0 for r in self.radii):
            raise ValueError("radii must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def strata(self, eps: float) -> tuple[float, ...]:
        """Radii to sample; always contains eps and the smallest radius."""
        if self.radii:
            if any(r > eps * (1 + 1e-12) for r in self.radii):
                raise ValueError(f"plan radii must be <= eps = {eps}")
            radii = set(self.radii) | {eps}
        else:
            radii = set(np.geomspace(eps / 10, eps, self.n_strata).tolist()) | {eps}
        return tuple(sorted(radii))

    def to_dict(self):
        return {"seed": self.seed, "count": self.count, "radii": list(self.radii),
                "n_strata": self.n_strata, "rejection_budget": self.rejection_budget}


def rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def sample_sphere(n: int, r: float, count: int, seed: int = 0, stream: int = 0,
                  center=None) -> np.ndarray:
    """Uniform points on the sphere of radius r in R^n (normalized Gaussians)."""
    if r <= 0 or count < 1:
        raise ValueError("need r > 0 and count >= 1")
    g = rng(seed, stream).standard_normal((count, n))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    pts = r * g / norms
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


def sample_ball(n: int, r: float, count: int, seed: int = 0, stream: int = 0,
                center=None) -> np.ndarray:
    """Uniform points in the closed ball of radius r in R^n."""
    gen = rng(seed, stream)
    g = gen.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius = r * gen.random(count) ** (1.0 / n)
    pts = g * radius[:, None]
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


@dataclass
class RegionSample:
    mode: str
    points: np.ndarray
    radii: np.ndarray       # stratum radius of each point
    drawn: int
    notes: list[str] = field(default_factory=list)


def _onto_level(germ: MapGerm, x, delta: float, iters: int = 30) -> np.ndarray | None:
    # Newton on |f|^2 = delta^2 along the gradient (min-norm scalar update).
    for _ in range(iters):
        fx, J = value_and_jacobian(germ, x)
        g = float(fx @ fx) - delta * delta
        if abs(g) <= 1e-13 * delta * delta:
            return x
        grad = 2.0 * (J.T @ fx)
        gg = float(grad @ grad)
        if gg == 0.0:
            return None
        x = x - (g / gg) * grad
    return None


def sample_region(germ: MapGerm, eps: float, delta: float, mode: str, plan: SamplingPlan,
                  zero_tol: float = 1e-12, stream_offset: int = 0,
                  band: float = 0.1) -> RegionSample:
    """Rejection-sample points of B_eps.

    ``outside-tube`` keeps |f(x)| >= delta and ``punctured-ball`` keeps
    |f(x)| > zero_tol; both are stratified over spheres of the plan radii.
    ``tube-boundary`` keeps ball draws with |f(x)| within ``band * delta``
    of delta; Newton's method then moves each onto |f| = delta.

    A stratum that yields fewer than ``plan.count`` points within the budget
    (for instance a small sphere lying inside the tube) is recorded in the
    notes; the sampler only raises when no point at all is accepted.
    """
    if mode not in REGION_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {REGION_MODES}")
    radii = plan.strata(eps) if mode != "tube-boundary" else (eps,)
    pts, tags, drawn = [], [], 0
    notes: list[str] = []
    for j, r in enumerate(radii):
        stream = stream_offset + j
        budget = plan.count * plan.rejection_budget
        if mode == "tube-boundary":
            cand = sample_ball(germ.n, r, budget, plan.seed, stream)
        else:
            cand = sample_sphere(germ.n, r, budget, plan.seed, stream)
        kept = 0
        for x in cand:
            drawn += 1
            nf = float(np.linalg.norm(evaluate(germ, x)))
            if mode == "outside-tube":
                ok = nf >= delta and nf > zero_tol
            elif mode == "punctured-ball":
                ok = nf > zero_tol
            else:
                ok = abs(nf - delta) <= band * delta
                if ok:
                    x = _onto_level(germ, x, delta)
                    ok = x is not None and float(np.linalg.norm(x)) <= eps
            if ok:
                pts.append(x)
                tags.append(r)
                kept += 1
                if kept == plan.count:
                    break
        if kept < plan.count:
            notes.append(f"stratum r={r:.17g}: accepted {kept}/{plan.count} "
                         f"within the rejection budget")
    if not pts:
        raise RejectionBudgetExhausted(mode, 0, plan.count * len(radii), drawn)
    return RegionSample(mode, np.array(pts).reshape(-1, germ.n), np.array(tags), drawn, notes)
