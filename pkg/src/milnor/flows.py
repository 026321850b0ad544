"""Conic vector fields v_a(y) = y + |y|^2 a and the homeomorphisms h_a their flows define.

The normalized field v_a / <2y, v_a> increases |y|^2 at unit rate, so its
integral curves can be parametrized by t = |p(t)|^2. The curve through
theta on the sphere S_eta is P(theta, t), 0 < t <= eta^2, and

    h_a(s * theta) = P(theta, s * eta^2),   0 < s <= 1,

with h_a(0) = 0. Integration runs in log t, where the radial solution is a
plain exponential, and every accepted step is projected back onto
|p|^2 = t. The pre-projection defect is kept as a quality metric.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numkernel import OdeControl, integrate
from .sampling import SamplingPlan, rng, sample_sphere
from .tolerances import DEFAULT_TOLERANCES, ToleranceProfile


class AlphaZero(ValueError):
    pass


class DegenerateDenominator(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ConicParameter:
    alpha: tuple[float, ...]
    eta: float = 0.9

    def __post_init__(self):
        a = tuple(float(v) for v in np.ravel(self.alpha))
        object.__setattr__(self, "alpha", a)
        if not all(math.isfinite(v) for v in a):
            raise ValueError("alpha must be finite")
        if math.fsum(v * v for v in a) >= 1.0:
            raise ValueError(f"|alpha| must be < 1, got {math.sqrt(math.fsum(v * v for v in a))}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")

    @property
    def k(self) -> int:
        return len(self.alpha)

    @property
    def a(self) -> np.ndarray:
        return np.array(self.alpha)


def _vec(cp: ConicParameter, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (cp.k,):
        raise ValueError(f"expected a point in R^{cp.k}, got shape {y.shape}")
    return y


def conic_field(cp: ConicParameter, y) -> np.ndarray:
    y = _vec(cp, y)
    return y + (y @ y) * cp.a


def nontrivial_zero(cp: ConicParameter) -> np.ndarray:
    a = cp.a
    aa = float(a @ a)
    if aa == 0.0:
        raise AlphaZero("the radial field v_0 vanishes only at the origin")
    return -a / aa


def field_zeros(cp: ConicParameter, grid: int = 21, radius: float = 1.0, iters: int = 60,
                tol: float = 1e-12) -> np.ndarray:
    """Zeros of v_a found by damped Newton from a grid of seeds in B_radius.

    All seeds are iterated together; a step is halved (per seed) until the
    residual does not grow. Returns the distinct converged zeros lying in
    the open ball, merged at distance 1e-8.
    """
    a = cp.a
    axis = np.linspace(-radius, radius, grid)
    seeds = np.stack(np.meshgrid(*([axis] * cp.k), indexing="ij"), -1).reshape(-1, cp.k)
    y = seeds[np.einsum("ij,ij->i", seeds, seeds) < radius ** 2]

    def field(z):
        return z + np.einsum("ij,ij->i", z, z)[:, None] * a

    v = field(y)
    res = np.linalg.norm(v, axis=1)
    for _ in range(iters):
        J = np.eye(cp.k)[None] + 2.0 * a[None, :, None] * y[:, None, :]
        # pinv copes with seeds on the fold 1 + 2<a, y> = 0 where J is singular.
        step = np.einsum("nij,nj->ni", np.linalg.pinv(J), v)
        lam = np.ones(len(y))
        for _ in range(30):
            trial = y - lam[:, None] * step
            bad = np.linalg.norm(field(trial), axis=1) > res
            if not bad.any():
                break
            lam[bad] *= 0.5
        y = trial
        v = field(y)
        res = np.linalg.norm(v, axis=1)
        if np.all(res <= tol):
            break
    found = y[(res <= tol) & (np.linalg.norm(y, axis=1) < radius)]
    out: list[np.ndarray] = []
    for z in found:
        if all(np.linalg.norm(z - w) > 1e-8 for w in out):
            out.append(z)
    return np.array(out).reshape(-1, cp.k)


def normalized_field(cp: ConicParameter, y, floor: float = DEFAULT_TOLERANCES.denominator_floor
                     ) -> np.ndarray:
    """v_a(y) / <2y, v_a(y)>; raises DegenerateDenominator when that is <= floor * |y|^2."""
    y = _vec(cp, y)
    r2 = float(y @ y)
    v = y + r2 * cp.a
    den = 2.0 * float(y @ v)
    if not den > floor * r2 or r2 == 0.0:
        raise DegenerateDenominator(f"<2y, v_a(y)> = {den!r} at |y|^2 = {r2!r}")
    return v / den


# ---------------------------------------------------------------------------
# Flows


@dataclass
class FlowTrajectory:
    alpha: tuple[float, ...]
    eta: float
    t: np.ndarray          # strictly monotone, t = |p|^2
    points: np.ndarray     # (m, k)
    max_defect: float      # largest | |p|^2 - t | before projection
    n_steps: int = 0

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]

    def invariant_residual(self) -> float:
        return float(np.max(np.abs(np.sum(self.points ** 2, axis=1) - self.t)))


def _log_rhs(a: np.ndarray, floor: float) -> Callable:
    def rhs(sigma, p):
        r2 = p @ p
        v = p + r2 * a
        den = 2.0 * (p @ v)
        if not den > floor * r2:
            raise DegenerateDenominator(f"<2y, v_a(y)> = {den!r} at |y|^2 = {r2!r}")
        return (math.exp(sigma) / den) * v
    return rhs


def _project(sigma, p):
    t = math.exp(sigma)
    r2 = float(p @ p)
    return p * math.sqrt(t / r2), abs(r2 - t)


def _flow(cp: ConicParameter, start, t0: float, t1: float, tol: ToleranceProfile,
          t_eval=None) -> FlowTrajectory:
    ctrl = OdeControl(rtol=tol.ode_rtol, atol=tol.ode_rtol * 1e-3)
    s_eval = None if t_eval is None else [math.log(v) for v in t_eval]
    traj = integrate(_log_rhs(cp.a, tol.denominator_floor), start, math.log(t0), math.log(t1),
                     ctrl, project=_project, max_defect=10 * tol.flow_tol,
                     s_eval=s_eval)
    t = np.exp(traj.s)
    pts = traj.y.copy()
    if s_eval is not None:
        # Steps were clipped to land exactly on the requested log-times.
        keep = np.isin(traj.s, np.array(s_eval))
        keep[0] = keep[-1] = True
        t, pts = t[keep], pts[keep]
        if keep.sum() != len(s_eval) + 2:
            raise RuntimeError("integrator did not land on every requested sample")
        t[1:-1] = t_eval
    t[0], t[-1] = t0, t1
    pts[-1] *= math.sqrt(t1 / float(pts[-1] @ pts[-1]))
    return FlowTrajectory(cp.alpha, cp.eta, t, pts, traj.max_defect, traj.n_accepted)


def _check_theta(cp: ConicParameter, theta) -> np.ndarray:
    theta = _vec(cp, theta)
    if abs(float(np.linalg.norm(theta)) - cp.eta) > 1e-12:
        raise DomainError(f"theta must lie on the sphere of radius eta = {cp.eta}")
    return theta


def flow_to(cp: ConicParameter, theta, t_target: float,
            tol: ToleranceProfile = DEFAULT_TOLERANCES) -> FlowTrajectory:
    """Integral curve P(theta, .) from t = eta^2 down to t_target."""
    theta = _check_theta(cp, theta)
    top = cp.eta ** 2
    if not 0.0 < t_target <= top:
        raise DomainError(f"t_target must lie in (0, eta^2 = {top}]")
    if t_target == top:
        return FlowTrajectory(cp.alpha, cp.eta, np.array([top]), theta[None, :].copy(), 0.0)
    return _flow(cp, theta, top, t_target, tol)


def curve_C(cp: ConicParameter, theta, samples: int, t_min: float | None = None,
            tol: ToleranceProfile = DEFAULT_TOLERANCES) -> FlowTrajectory:
    """Samples of the curve C_theta at geometrically spaced t in [t_min, eta^2]."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    theta = _check_theta(cp, theta)
    top = cp.eta ** 2
    t_min = 1e-4 * top if t_min is None else t_min
    ts = np.geomspace(top, t_min, samples)
    ts[0], ts[-1] = top, t_min
    return _flow(cp, theta, top, t_min, tol, t_eval=ts[1:-1])


# Endpoint cache keyed by the exact float values of (alpha, eta, start, t0, t1).
_CACHE_SIZE = 50_000
_cache: OrderedDict = OrderedDict()
_cache_lock = threading.Lock()
_cache_enabled = True


def set_cache_enabled(enabled: bool) -> None:
    global _cache_enabled
    _cache_enabled = enabled
    clear_cache()


def clear_cache() -> None:
    with _cache_lock:
        _cache.clear()


def _endpoint(cp: ConicParameter, start: np.ndarray, t0: float, t1: float,
              tol: ToleranceProfile) -> np.ndarray:
    key = (cp.alpha, cp.eta, tuple(start.tolist()), t0, t1, tol.ode_rtol, tol.flow_tol)
    if _cache_enabled:
        with _cache_lock:
            hit = _cache.get(key)
            if hit is not None:
                _cache.move_to_end(key)
                return hit.copy()
    end = _flow(cp, start, t0, t1, tol).endpoint
    if _cache_enabled:
        with _cache_lock:
            _cache[key] = end.copy()
            if len(_cache) > _CACHE_SIZE:
                _cache.popitem(last=False)
    return end


def h_apply(cp: ConicParameter, x, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> np.ndarray:
    """h_a(x) for |x| <= eta; |h_a(x)| = sqrt(eta |x|)."""
    x = _vec(cp, x)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        return np.zeros(cp.k)
    eta = cp.eta
    if r > eta * (1 + 1e-12):
        raise DomainError(f"|x| = {r} exceeds eta = {eta}")
    theta = eta * x / r
    target = min(r * eta, eta * eta)
    if target == eta * eta:
        return theta
    return _endpoint(cp, theta, eta * eta, target, tol)


def h_invert(cp: ConicParameter, y, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> np.ndarray:
    """Inverse of h_a on the punctured ball: flow out to S_eta, then rescale."""
    y = _vec(cp, y)
    s0 = float(y @ y)
    eta = cp.eta
    if s0 == 0.0:
        raise DomainError("h_invert is evaluated away from the origin")
    if s0 > eta * eta * (1 + 1e-12):
        raise DomainError(f"|y| = {math.sqrt(s0)} exceeds eta = {eta}")
    if s0 >= eta * eta:
        theta = y * (eta / math.sqrt(s0))
    else:
        theta = _endpoint(cp, y, s0, eta * eta, tol)
    return (s0 / (eta * eta)) * theta


# ---------------------------------------------------------------------------
# Closed-form homeomorphism of the worked (x^2 z + y^3 - z, x) example


def example1_h(eta: float, y, branch: int | None = None) -> np.ndarray:
    """Evaluate the printed two-branch formula for h on B_eta in R^2.

    ``branch`` 1 needs y1 != 0, branch 2 needs y2 != 0; by default branch 1
    is used whenever y1 != 0.
    """
    y1, y2 = (float(v) for v in y)
    r = math.hypot(y1, y2)
    if r > eta * (1 + 1e-12):
        raise DomainError(f"|y| = {r} exceeds eta = {eta}")
    if r == 0.0:
        return np.zeros(2)
    if branch is None:
        branch = 1 if y1 != 0.0 else 2
    e1 = math.exp(1.0 - eta / math.sqrt(y1 ** 2 + y2 ** 2))
    e2 = math.exp(0.5 - eta / (2.0 * math.sqrt(y1 ** 2 + y2 ** 2)))
    if branch == 1:
        if y1 == 0.0:
            raise DomainError("branch 1 requires y1 != 0")
        q = y2 / y1
        s = math.sqrt(1.0 + q ** 2)
        return eta * np.array([e1 / s, q / s * e2])
    if branch == 2:
        if y2 == 0.0:
            raise DomainError("branch 2 requires y2 != 0")
        q = y1 / y2
        s = math.sqrt(1.0 + q ** 2)
        return eta * np.array([q / s * e1, e2 / s])
    raise ValueError("branch must be 1 or 2")


def example1_xi(eta: float, y) -> float:
    y1, y2 = (float(v) for v in y)
    root = math.sqrt(y2 ** 4 + 4.0 * y1 ** 2 * eta ** 2)
    return eta / ((1.0 - math.log((y2 ** 2 + root) / (2.0 * eta ** 2))) * (y2 ** 2 + root))


def example1_h_inv(eta: float, y) -> np.ndarray:
    """Evaluate the printed closed form of h^{-1}, including the xi factor."""
    y1, y2 = (float(v) for v in y)
    r = math.hypot(y1, y2)
    if r > eta * (1 + 1e-12):
        raise DomainError(f"|y| = {r} exceeds eta = {eta}")
    if r == 0.0:
        return np.zeros(2)
    root = math.sqrt(y2 ** 4 + 4.0 * y1 ** 2 * eta ** 2)
    xi = example1_xi(eta, y)
    return xi * np.array([2.0 * eta * y1, y2 * math.sqrt(2.0 * y2 ** 2 + 2.0 * root)])


@dataclass
class Example1Report:
    eta: float
    points: np.ndarray
    roundtrip_residuals: np.ndarray      # |h_inv(h(y)) - y|
    overlap_differences: np.ndarray      # |h_branch1(y) - h_branch2(y)| where both apply
    norm_ratio: np.ndarray               # |h(y)| / |y|
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "eta": self.eta,
            "samples": int(len(self.points)),
            "roundtrip_max": float(np.max(self.roundtrip_residuals)),
            "roundtrip_median": float(np.median(self.roundtrip_residuals)),
            "overlap_max": float(np.max(self.overlap_differences)),
            "overlap_agree_fraction": float(np.mean(self.overlap_differences <= 1e-9)),
            "notes": list(self.notes),
        }


def example1_report(eta: float = 0.9, count: int = 200, seed: int = 0) -> Example1Report:
    """Measure (not assert) round trip and branch overlap of the printed formulas."""
    g = rng(seed, 0)
    pts = np.array([p * r for p, r in zip(sample_sphere(2, 1.0, count, seed, 1),
                                          eta * np.sqrt(g.uniform(1e-4, 1.0, count)))])
    rt, ov, ratio = [], [], []
    for y in pts:
        hy = example1_h(eta, y)
        ratio.append(np.linalg.norm(hy) / np.linalg.norm(y))
        try:
            back = example1_h_inv(eta, hy)
            rt.append(float(np.linalg.norm(back - y)))
        except (DomainError, ValueError):
            rt.append(math.inf)
        ov.append(float(np.linalg.norm(example1_h(eta, y, 1) - example1_h(eta, y, 2))))
    rt, ov = np.array(rt), np.array(ov)
    notes = [
        f"round trip h_inv(h(y)) - y: max {np.max(rt):.3e}, median {np.median(rt):.3e}; "
        "the printed formulas are evaluated verbatim and not corrected",
        f"branches agree on {np.mean(ov <= 1e-9):.0%} of points where both apply "
        f"(max difference {np.max(ov):.3e})",
    ]
    return Example1Report(eta, pts, rt, ov, np.array(ratio), notes)


# ---------------------------------------------------------------------------
# Axiom checks for a conic homeomorphism given as callbacks


@dataclass
class AxiomSample:
    theta: list
    s: float                     # point s * theta on the segment L_theta
    second_difference: float     # |h((s-d)th) - 2h(s th) + h((s+d)th)| / d^2
    second_difference_half: float
    smooth_path: bool
    jacobian_cond: float
    min_singular_value: float
    submersion: bool
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.smooth_path and self.submersion


@dataclass
class AxiomReport:
    eta: float
    samples: list[AxiomSample]

    @property
    def passed(self) -> bool:
        return all(s.ok for s in self.samples)

    @property
    def min_submersion_margin(self) -> float:
        vals = [s.min_singular_value for s in self.samples if s.error is None]
        return min(vals) if vals else math.nan

    def to_dict(self):
        return {"eta": self.eta, "pass": self.passed,
                "min_submersion_margin": self.min_submersion_margin,
                "samples": [vars(s).copy() for s in self.samples]}


def fd_jacobian(fun: Callable, x: np.ndarray, step: float) -> np.ndarray:
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * step))
    return np.array(cols).T


def verify_conic_axioms(apply: Callable, invert: Callable, eta: float, k: int = 2,
                        plan: SamplingPlan = SamplingPlan(count=20),
                        tol: ToleranceProfile = DEFAULT_TOLERANCES,
                        curve_step: float = 1e-3, smooth_rtol: float = 0.1) -> AxiomReport:
    """Sampled checks of the three conic-homeomorphism axioms.

    (i) the image of each segment is a smooth path: second differences at
        steps d and d/2 agree; (ii) the inverse has a finite finite-difference
        Jacobian; (iii) its smallest singular value exceeds the submersion
        floor. Callback failures are recorded per sample.
    """
    thetas = sample_sphere(k, eta, plan.count, plan.seed, 0)
    ss = rng(plan.seed, 1).uniform(0.05, 0.95, plan.count)
    out = []
    for theta, s in zip(thetas, ss):
        rec = dict(theta=theta.tolist(), s=float(s), second_difference=math.nan,
                   second_difference_half=math.nan, smooth_path=False,
                   jacobian_cond=math.nan, min_singular_value=math.nan, submersion=False)
        try:
            d = curve_step * s

            def d2(step):
                a = np.asarray(apply((s - step) * theta))
                b = np.asarray(apply(s * theta))
                c = np.asarray(apply((s + step) * theta))
                return float(np.linalg.norm(a - 2 * b + c)) / step ** 2

            full, half = d2(d), d2(d / 2)
            rec["second_difference"], rec["second_difference_half"] = full, half
            rec["smooth_path"] = bool(math.isfinite(full) and math.isfinite(half)
                                      and abs(full - half) <= smooth_rtol * max(full, 1.0))
            y = np.asarray(apply(s * theta), dtype=float)
            J = fd_jacobian(invert, y, tol.fd_step * max(float(np.linalg.norm(y)), 1e-300))
            sv = np.linalg.svd(J, compute_uv=False)
            rec["min_singular_value"] = float(sv[-1])
            rec["jacobian_cond"] = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
            rec["submersion"] = bool(np.all(np.isfinite(J)) and sv[-1] > tol.submersion_floor)
        except Exception as exc:  # noqa: BLE001 - recorded per sample
            rec["error"] = f"{type(exc).__name__}: {exc}"
        out.append(AxiomSample(**rec))
    return AxiomReport(eta, out)
