"""Dense linear algebra and an adaptive Runge-Kutta integrator.

Matrices here are tiny (k, n <= ~10), so everything is dense and built on
a full SVD. The integrator is an explicit embedded 8(5,3) pair with an
optional projection hook that is applied after every accepted step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _dop853 as tab

DEFAULT_RANK_TOL = 1e-10


class NonFiniteInput(ValueError):
    pass


class Inconsistent(ValueError):
    """The right-hand side is not in the column space of the matrix."""

    def __init__(self, residual, tolerance):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(f"least-squares residual {residual:.3e} exceeds {tolerance:.3e}")


@dataclass(frozen=True)
class RankFactorization:
    singular_values: np.ndarray  # descending, length min(k, n)
    row_basis: np.ndarray        # (rank, n), orthonormal rows
    column_basis: np.ndarray     # (k, rank), orthonormal columns
    kernel_basis: np.ndarray     # (n, n - rank), orthonormal columns
    rank: int
    tol: float
    shape: tuple[int, int]
    left: np.ndarray             # (k, k) full left singular vectors

    def pinv_apply(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        s = self.singular_values[: self.rank]
        return self.row_basis.T @ ((self.column_basis.T @ b) / s)

    def reconstruct(self) -> np.ndarray:
        """Reassemble M from all singular triplets (including sub-tolerance ones)."""
        m = self.singular_values.size
        Vt = np.vstack([self.row_basis, self.kernel_basis.T])
        return (self.left[:, :m] * self.singular_values) @ Vt[:m]


def factorize(M, tol: float = DEFAULT_RANK_TOL) -> RankFactorization:
    """Rank-revealing SVD. Numeric rank counts singular values > tol * s_max."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise NonFiniteInput("matrix has non-finite entries")
    k, n = M.shape
    if M.size == 0:
        return RankFactorization(np.zeros(0), np.zeros((0, n)), np.zeros((k, 0)),
                                 np.eye(n), 0, tol, (k, n), np.eye(k))
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > tol * smax)) if smax > 0 else 0
    return RankFactorization(
        singular_values=s,
        row_basis=Vt[:rank],
        column_basis=U[:, :rank],
        kernel_basis=Vt[rank:].T,
        rank=rank,
        tol=tol,
        shape=(k, n),
        left=U,
    )


def min_norm_solve(M, b, tol: float = DEFAULT_RANK_TOL, residual_tol: float | None = 1e-9,
                   fact: RankFactorization | None = None) -> np.ndarray:
    """Least-norm x with Mx = b.

    The solution lies in the row space, i.e. it is orthogonal to ker(M).
    Raises Inconsistent when the least-squares residual exceeds
    ``residual_tol * max(1, |b|)``; pass ``residual_tol=None`` to skip the
    check (plain pseudo-inverse).
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    b = np.asarray(b, dtype=float)
    fact = fact if fact is not None else factorize(M, tol)
    x = fact.pinv_apply(b) if fact.rank else np.zeros(M.shape[1])
    if residual_tol is not None:
        res = float(np.linalg.norm(M @ x - b))
        bound = residual_tol * max(1.0, float(np.linalg.norm(b)))
        if res > bound:
            raise Inconsistent(res, bound)
    return x


def project_onto_kernel(fact: RankFactorization, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    K = fact.kernel_basis
    if K.shape[1] == 0:
        return np.zeros_like(v)
    return K @ (K.T @ v)


# ---------------------------------------------------------------------------
# ODE integration


class IntegrationError(RuntimeError):
    pass


class StepUnderflow(IntegrationError):
    pass


class MaxStepsExceeded(IntegrationError):
    pass


class FieldEvaluationError(IntegrationError):
    pass


class InvariantDrift(StepUnderflow):
    """The projection defect stayed above its bound even at the minimum step."""


@dataclass(frozen=True)
class OdeControl:
    rtol: float = 1e-12
    atol: float = 1e-14
    first_step: float | None = None
    min_step: float = 1e-14
    max_steps: int = 100_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0 or self.min_step <= 0:
            raise ValueError("tolerances and min_step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class Trajectory:
    s: np.ndarray           # (m,), monotone
    y: np.ndarray           # (m, dim)
    n_accepted: int
    n_rejected: int
    n_evals: int
    max_defect: float = 0.0  # largest pre-projection defect, 0 without projection


_SAFETY, _MIN_FACTOR, _MAX_FACTOR = 0.9, 0.2, 10.0
_N_STAGES = tab.N_STAGES
_A = tab.A[:_N_STAGES, :_N_STAGES]
_B = tab.B
_C = tab.C[:_N_STAGES]
_E3 = tab.E3
_E5 = tab.E5


def _initial_step(fun, s0, y0, f0, direction, rtol, atol):
    # Hairer-Norsett-Wanner starting step heuristic, order 8.
    scale = atol + np.abs(y0) * rtol
    d0 = np.linalg.norm(y0 / scale) / math.sqrt(y0.size)
    d1 = np.linalg.norm(f0 / scale) / math.sqrt(y0.size)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = fun(s0 + h0 * direction, y1)
    d2 = np.linalg.norm((f1 - f0) / scale) / math.sqrt(y0.size) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100 * h0, h1)


def integrate(field: Callable, y0, s0: float, s1: float, ctrl: OdeControl = OdeControl(),
              project: Callable | None = None, max_defect: float = math.inf,
              s_eval=None) -> Trajectory:
    """Integrate y' = field(s, y) from s0 to s1 (either direction).

    ``project(s, y) -> (y_projected, defect)`` is applied after each
    accepted step; a step whose defect exceeds ``max_defect`` is rejected
    and retried with a smaller step. Steps are clipped to land exactly on
    every value in ``s_eval`` (which must lie between s0 and s1).
    """
    y = np.array(y0, dtype=float)
    if s0 == s1:
        raise ValueError("s0 and s1 must differ")
    direction = 1.0 if s1 > s0 else -1.0
    stops = [s1]
    if s_eval is not None:
        stops = sorted({float(v) for v in s_eval if (v - s0) * direction > 0
                        and (s1 - v) * direction >= 0} | {float(s1)},
                       key=lambda v: (v - s0) * direction)

    n_evals = 0

    def fun(s, state):
        nonlocal n_evals
        n_evals += 1
        try:
            out = np.asarray(field(s, state), dtype=float)
        except IntegrationError:
            raise
        except Exception as exc:  # noqa: BLE001 - surfaced as integration failure
            raise FieldEvaluationError(f"field evaluation failed at s={s!r}: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise FieldEvaluationError(f"non-finite field value at s={s!r}")
        return out

    s = float(s0)
    f = fun(s, y)
    h = ctrl.first_step if ctrl.first_step else _initial_step(
        fun, s, y, f, direction, ctrl.rtol, ctrl.atol)
    ss, ys = [s], [y.copy()]
    K = np.empty((_N_STAGES + 1, y.size))
    accepted = rejected = 0
    worst_defect = 0.0
    stop_idx = 0
    while stop_idx < len(stops):
        if accepted + rejected >= ctrl.max_steps:
            raise MaxStepsExceeded(f"more than {ctrl.max_steps} steps between {s0} and {s1}")
        target = stops[stop_idx]
        remaining = abs(target - s)
        hit = h >= remaining
        step = remaining if hit else h
        if step < ctrl.min_step and not hit:
            raise StepUnderflow(f"step size {step:.3e} below minimum at s={s!r}")
        hs = step * direction

        K[0] = f
        for i in range(1, _N_STAGES):
            dy = (K[:i].T @ _A[i, :i]) * hs
            K[i] = fun(s + _C[i] * hs, y + dy)
        y_new = y + hs * (K[:_N_STAGES].T @ _B)
        s_new = target if hit else s + hs
        f_new = fun(s_new, y_new)
        K[-1] = f_new

        scale = ctrl.atol + np.maximum(np.abs(y), np.abs(y_new)) * ctrl.rtol
        err5 = (K.T @ _E5) / scale
        err3 = (K.T @ _E3) / scale
        e5, e3 = float(err5 @ err5), float(err3 @ err3)
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = step * e5 / math.sqrt((e5 + 0.01 * e3) * y.size)

        defect = 0.0
        if err <= 1.0 and project is not None:
            y_proj, defect = project(s_new, y_new)
            if defect > max_defect:
                if step <= ctrl.min_step:
                    raise InvariantDrift(f"projection defect {defect:.3e} at s={s_new!r}")
                rejected += 1
                h = max(step * 0.5, ctrl.min_step)
                continue
            if y_proj is not y_new:
                y_new = np.asarray(y_proj, dtype=float)
                f_new = fun(s_new, y_new)

        if err <= 1.0:
            accepted += 1
            worst_defect = max(worst_defect, defect)
            s, y, f = s_new, y_new, f_new
            ss.append(s)
            ys.append(y.copy())
            factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, _SAFETY * err ** (-1 / 8))
            if not hit:
                h = step * factor
            else:
                h = max(h, step * factor) if step < h else step * factor
                stop_idx += 1
        else:
            rejected += 1
            h = step * max(_MIN_FACTOR, _SAFETY * err ** (-1 / 8))
            if h < ctrl.min_step:
                raise StepUnderflow(f"step size {h:.3e} below minimum at s={s!r}")

    return Trajectory(np.array(ss), np.array(ys), accepted, rejected, n_evals, worst_defect)
