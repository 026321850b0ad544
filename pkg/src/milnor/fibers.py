"""Point samples of fibres and of the curved-ray preimages E_theta."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flows import ConicParameter, curve_C, flow_to
from .germ import MapGerm, evaluate, value_and_jacobian
from .numkernel import factorize, min_norm_solve
from .regularity import CriticalPoint, ZeroValue, suitability_at
from .sampling import rng, sample_ball, sample_sphere
from .tolerances import DEFAULT_TOLERANCES, ToleranceProfile

RESIDUAL_TOL = 1e-10
MERGE_RADIUS = 1e-6
MAX_ITER = 50


class KernelTrivial(ValueError):
    pass


class CorrectionFailed(RuntimeError):
    pass


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    reason: str = ""


def gauss_newton(germ: MapGerm, x0, c, tol: float = RESIDUAL_TOL, max_iter: int = MAX_ITER,
                 rank_tol: float = 1e-10) -> NewtonResult:
    """Solve f(x) = c by minimum-norm Gauss-Newton steps with step halving."""
    x = np.array(x0, dtype=float)
    c = np.asarray(c, dtype=float)
    fx, J = value_and_jacobian(germ, x)
    r = fx - c
    res = float(np.linalg.norm(r))
    for it in range(max_iter):
        if res <= tol * 1e-2:
            return NewtonResult(x, res, it, True)
        step = min_norm_solve(J, r, rank_tol, residual_tol=None)
        lam = 1.0
        while lam > 1e-10:
            x_new = x - lam * step
            f_new, J_new = value_and_jacobian(germ, x_new)
            r_new = f_new - c
            res_new = float(np.linalg.norm(r_new))
            if res_new < res:
                break
            lam *= 0.5
        else:
            return NewtonResult(x, res, it, res <= tol, "line search stalled")
        x, J, r, res = x_new, J_new, r_new, res_new
    return NewtonResult(x, res, max_iter, res <= tol, "" if res <= tol else "max iterations")


@dataclass
class FiberSample:
    target: np.ndarray
    eps: float
    points: np.ndarray        # (m, n) accepted points
    residuals: np.ndarray     # (m,)
    seed: int
    stream: int
    starts: int
    failures: list[dict] = field(default_factory=list)

    def rows(self) -> list[list]:
        return [[*x.tolist(), *self.target.tolist(), r]
                for x, r in zip(self.points, self.residuals)]


def point_cloud_header(n: int, k: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)] + [f"c{i + 1}" for i in range(k)] + ["residual"]


def fiber_points(germ: MapGerm, c, eps: float, count: int = 50, seed: int = 0,
                 stream: int = 0) -> FiberSample:
    """Points of f^{-1}(c) inside B_eps from Gauss-Newton runs started in B_eps.

    For n = k the fibre is discrete and duplicates closer than 1e-6 are merged.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (germ.k,):
        raise ValueError(f"target must lie in R^{germ.k}")
    starts = sample_ball(germ.n, eps, count, seed, stream)
    pts, res, fails = [], [], []
    for i, x0 in enumerate(starts):
        out = gauss_newton(germ, x0, c)
        if not out.converged or out.residual > RESIDUAL_TOL:
            fails.append({"start": i, "reason": out.reason or "no convergence",
                          "residual": out.residual})
            continue
        if float(np.linalg.norm(out.x)) > eps:
            fails.append({"start": i, "reason": "left the ball", "residual": out.residual})
            continue
        if germ.n == germ.k and any(np.linalg.norm(out.x - p) <= MERGE_RADIUS for p in pts):
            continue
        pts.append(out.x)
        res.append(out.residual)
    return FiberSample(c, eps, np.array(pts).reshape(-1, germ.n), np.array(res), seed, stream,
                       count, fails)


@dataclass
class WalkPath:
    points: np.ndarray
    residuals: np.ndarray
    target: np.ndarray


def fiber_walk(germ: MapGerm, x0, steps: int = 50, step_size: float = 0.05,
               eps: float = 1.0, seed: int = 0, rank_tol: float = 1e-10) -> WalkPath:
    """Predictor-corrector walk along the fibre through x0.

    Each step moves along a random unit kernel direction of Df and corrects
    back to the fibre by Gauss-Newton; the walk stops once it leaves B_eps.
    """
    if germ.n == germ.k:
        raise KernelTrivial("n = k: fibres are discrete, there is no kernel direction")
    x = np.array(x0, dtype=float)
    c = evaluate(germ, x)
    g = rng(seed, 0)
    pts, res = [x.copy()], [0.0]
    for _ in range(steps):
        _, J = value_and_jacobian(germ, x)
        K = factorize(J, rank_tol).kernel_basis
        if K.shape[1] == 0:
            raise KernelTrivial(f"Df has trivial kernel at {x.tolist()}")
        d = K @ g.standard_normal(K.shape[1])
        d /= np.linalg.norm(d)
        out = gauss_newton(germ, x + step_size * d, c)
        if not out.converged:
            raise CorrectionFailed(f"corrector failed near {x.tolist()}: {out.reason}")
        if float(np.linalg.norm(out.x)) > eps:
            break
        x = out.x
        pts.append(x.copy())
        res.append(out.residual)
    return WalkPath(np.array(pts), np.array(res), c)


def milnor_tube_sample(germ: MapGerm, eps: float, delta: float, n_values: int = 16,
                       count: int = 20, seed: int = 0) -> list[FiberSample]:
    """Fibres over values c drawn uniformly on the sphere |c| = delta."""
    values = sample_sphere(germ.k, delta, n_values, seed, 0)
    return [fiber_points(germ, c, eps, count, seed, j + 1) for j, c in enumerate(values)]


@dataclass
class EThetaSample:
    alpha: tuple
    eta: float
    theta: np.ndarray
    t: np.ndarray
    curve: np.ndarray               # (m, k) points of C_theta
    fibers: list[FiberSample]

    def rows(self) -> list[list]:
        return [row for fs in self.fibers for row in fs.rows()]


def e_theta_sample(germ: MapGerm, cp: ConicParameter, theta, eps: float, n_curve: int = 8,
                   count: int = 20, seed: int = 0,
                   tol: ToleranceProfile = DEFAULT_TOLERANCES) -> EThetaSample:
    """Sample E_theta = f^{-1}(C_theta) by solving for fibres over curve points."""
    if cp.k != germ.k:
        raise ValueError(f"alpha must lie in R^{germ.k}")
    traj = curve_C(cp, theta, n_curve, tol=tol)
    fibers = [fiber_points(germ, y, eps, count, seed, j + 1) for j, y in enumerate(traj.points)]
    return EThetaSample(cp.alpha, cp.eta, np.asarray(theta, dtype=float), traj.t, traj.points,
                        fibers)


@dataclass
class TangencyCheck:
    x: np.ndarray
    score: float               # |projection of x/|x| onto T_x E_theta|
    suitable: bool | None
    margin: float | None       # suitability score max(|radial|, vertical)

    @property
    def transverse(self) -> bool:
        return self.score > TANGENCY_FLOOR


TANGENCY_FLOOR = 1e-6


def curve_tangent(cp: ConicParameter, theta, t: float,
                  tol: ToleranceProfile = DEFAULT_TOLERANCES, rel_dt: float = 1e-5) -> np.ndarray:
    """Unit tangent of C_theta at parameter t by central differences of the flow."""
    # One-sided at the outer end of the curve, where t = eta^2.
    yp = flow_to(cp, theta, min(t * (1 + rel_dt), cp.eta ** 2), tol).endpoint
    ym = flow_to(cp, theta, t * (1 - rel_dt), tol).endpoint
    c = yp - ym
    return c / np.linalg.norm(c)


def e_theta_tangency(germ: MapGerm, cp: ConicParameter, theta, x,
                     tol: ToleranceProfile = DEFAULT_TOLERANCES, tangent=None) -> TangencyCheck:
    """Finite-difference transversality of E_theta and the sphere through x.

    T_x E_theta is the kernel of (I - c c^T) Df, with c the unit tangent of
    the curve at f(x) (estimated from the flow unless given). E_theta meets
    the sphere transversely iff the radial direction has a nonzero
    component in T_x E_theta.
    """
    x = np.asarray(x, dtype=float)
    fx, J = value_and_jacobian(germ, x)
    c = curve_tangent(cp, theta, float(fx @ fx), tol) if tangent is None else tangent
    P = np.eye(germ.k) - np.outer(c, c)
    K = factorize(P @ J, tol.rank_tol).kernel_basis
    xh = x / np.linalg.norm(x)
    score = float(np.linalg.norm(K.T @ xh))
    try:
        v = suitability_at(germ, cp.a, x, tol)
        return TangencyCheck(x, score, v.suitable, v.score)
    except (CriticalPoint, ZeroValue):
        return TangencyCheck(x, score, None, None)
