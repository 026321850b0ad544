import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from milnor.numkernel import (FieldEvaluationError, Inconsistent, MaxStepsExceeded,
                              NonFiniteInput, OdeControl, StepUnderflow, factorize, integrate,
                              min_norm_solve, project_onto_kernel)

EX1_DF0 = np.array([[0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])


def _span_equal(A, B):
    # Same column span: projectors agree.
    return np.allclose(A @ A.T, B @ B.T, atol=1e-12)


def test_factorize_examples():
    f = factorize(EX1_DF0)
    assert f.rank == 2 and _span_equal(f.kernel_basis, np.array([[0.0], [1.0], [0.0]]))
    z = factorize(np.zeros((2, 3)))
    assert z.rank == 0 and _span_equal(z.kernel_basis, np.eye(3))
    f1 = factorize([[0, 0, 0], [1, 0, 0]])
    assert f1.rank == 1
    assert _span_equal(f1.kernel_basis, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))


def test_factorize_rejects_nonfinite():
    with pytest.raises(NonFiniteInput):
        factorize([[1.0, np.nan]])


def test_min_norm_solve_examples():
    b = np.array([0.3, -1.2])
    assert np.allclose(min_norm_solve(np.eye(2), b), b)
    assert np.allclose(min_norm_solve([[2, 0], [0, 2]], [0, 1]), [0, 0.5])
    assert np.allclose(min_norm_solve(EX1_DF0, [0, 1]), [1, 0, 0])


def test_min_norm_solve_inconsistent():
    with pytest.raises(Inconsistent):
        min_norm_solve([[1, 0], [0, 0]], [0, 1])
    # Residual check can be disabled for a plain pseudo-inverse.
    assert np.allclose(min_norm_solve([[1, 0], [0, 0]], [0, 1], residual_tol=None), [0, 0])


def test_project_onto_kernel_examples():
    f = factorize(EX1_DF0)
    assert np.allclose(project_onto_kernel(f, [1.0, 2.0, 3.0]), [0, 2, 0])
    assert np.allclose(project_onto_kernel(factorize(np.eye(2)), [4.0, 5.0]), 0)
    f1 = factorize([[1.0, 0, 0]])
    assert np.allclose(project_onto_kernel(f1, [1.0, 2.0, 3.0]), [0, 2, 3])


_mat = st.tuples(st.integers(1, 4), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-3, 3)))


@settings(max_examples=150, deadline=None)
@given(_mat, st.integers(0, 2 ** 32 - 1))
def test_min_norm_is_canonical(M, seed):
    x_any = np.random.default_rng(seed).standard_normal(M.shape[1])
    fact = factorize(M)
    x = min_norm_solve(M, M @ x_any, fact=fact)
    scale = max(1.0, float(np.linalg.norm(M)) * float(np.linalg.norm(x_any)))
    assert np.linalg.norm(M @ x - M @ x_any) <= 1e-10 * scale
    K = fact.kernel_basis
    if K.shape[1]:
        assert np.max(np.abs(K.T @ x)) <= 1e-10 * max(1.0, float(np.linalg.norm(x)))


@settings(max_examples=150, deadline=None)
@given(_mat)
def test_factorization_invariants(M):
    f = factorize(M)
    s = f.singular_values
    assert np.all(s >= 0) and np.all(np.diff(s) <= 0)
    norm = float(np.linalg.norm(M, 2))
    assert np.linalg.norm(f.reconstruct() - M, 2) <= 1e-12 * norm
    K = f.kernel_basis
    assert np.allclose(K.T @ K, np.eye(K.shape[1]), atol=1e-12)
    if K.shape[1]:
        assert np.max(np.linalg.norm(M @ K, axis=0)) <= 1e-10 * max(norm, 1e-300)


def test_integrate_exponential():
    tr = integrate(lambda s, y: y, [1.0], 0.0, 1.0, OdeControl(rtol=1e-12))
    assert abs(tr.y[-1, 0] - math.e) <= 1e-9
    assert np.all(np.diff(tr.s) > 0)


@pytest.mark.parametrize("lam", [-2, -1, 0, 1, 2])
def test_integrate_linear_closed_form(lam):
    rtol = 1e-10
    tr = integrate(lambda s, y: lam * y, [1.0], 0.0, 1.0, OdeControl(rtol=rtol))
    exact = math.exp(lam)
    assert abs(tr.y[-1, 0] - exact) <= 10 * rtol * exact + 10 * 1e-14


def test_integrate_constant_and_backward():
    tr = integrate(lambda s, y: np.zeros(2), [0.5, -0.5], 1.0, 0.0)
    assert np.all(tr.y == [0.5, -0.5]) and np.all(np.diff(tr.s) < 0)


def test_integrate_radial_field():
    # y' = y / (2|y|^2) from |y|^2 = eta^2 down to eta^2 / 4 gives (1/2) theta.
    eta = 0.9
    theta = np.array([0.0, eta])
    tr = integrate(lambda s, y: y / (2 * (y @ y)), theta, eta ** 2, eta ** 2 / 4)
    assert np.allclose(tr.y[-1], theta / 2, atol=1e-10)


def test_integrate_s_eval_exact_landing():
    tr = integrate(lambda s, y: y, [1.0], 0.0, 1.0, s_eval=[0.25, 0.5, 0.75])
    for v in (0.25, 0.5, 0.75, 1.0):
        assert v in tr.s.tolist()


def test_integrate_errors():
    with pytest.raises(MaxStepsExceeded):
        integrate(lambda s, y: y, [1.0], 0.0, 10.0, OdeControl(max_steps=3))
    with pytest.raises(StepUnderflow):
        integrate(lambda s, y: y ** 2, [1.0], 0.0, 2.0, OdeControl(min_step=1e-6))
    with pytest.raises(FieldEvaluationError):
        integrate(lambda s, y: np.array([np.nan]), [1.0], 0.0, 1.0)
    with pytest.raises(ValueError):
        integrate(lambda s, y: y, [1.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        OdeControl(rtol=0)


def test_projection_hook_and_defect():
    # Circle flow with renormalization: defect recorded, radius preserved.
    def field(s, y):
        return np.array([-y[1], y[0]])

    def proj(s, y):
        r = float(np.linalg.norm(y))
        return y / r, abs(r - 1.0)

    tr = integrate(field, [1.0, 0.0], 0.0, 2 * math.pi, project=proj)
    assert np.allclose(np.linalg.norm(tr.y, axis=1), 1.0, atol=1e-15)
    assert tr.max_defect < 1e-10
    assert np.allclose(tr.y[-1], [1.0, 0.0], atol=1e-9)
