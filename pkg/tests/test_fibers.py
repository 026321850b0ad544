import math

import numpy as np
import pytest

from milnor.fibers import (CorrectionFailed, KernelTrivial, curve_tangent, e_theta_sample,
                           e_theta_tangency, fiber_points, fiber_walk, gauss_newton,
                           milnor_tube_sample, point_cloud_header)
from milnor.flows import ConicParameter
from milnor.germ import parse_germ

ETA = 0.9


def test_fiber_points_projection(corpus):
    g = corpus["projection"]
    a, b, eps = 0.1, -0.2, 0.5
    fs = fiber_points(g, [a, b], eps, 30, seed=1)
    assert len(fs.points) > 0
    assert np.allclose(fs.points[:, :2], [a, b], atol=1e-10)
    assert np.all(np.abs(fs.points[:, 2]) <= math.sqrt(eps ** 2 - a ** 2 - b ** 2) + 1e-12)


def test_fiber_points_squaring_merges(corpus):
    fs = fiber_points(corpus["squaring"], [1.0, 0.0], 2.0, 50, seed=0)
    got = sorted(map(tuple, np.round(fs.points, 8)))
    assert got == [(-1.0, 0.0), (1.0, 0.0)]


def test_residual_contract(corpus):
    for name in ("example1", "gstar", "projection"):
        g = corpus[name]
        c = np.array([0.05, -0.02])
        fs = fiber_points(g, c, 0.8, 30, seed=2)
        for x, r in zip(fs.points, fs.residuals):
            assert np.linalg.norm(g(x) - c) <= 1e-10 and r <= 1e-10
            assert np.linalg.norm(x) <= 0.8


def test_fiber_points_records_failures():
    g = parse_germ("vars x y\nx^2 + y^2; x*y")
    fs = fiber_points(g, [-1.0, 0.0], 1.0, 5, seed=0)     # empty fibre
    assert len(fs.points) == 0 and len(fs.failures) == 5


def test_gauss_newton_converges():
    g = parse_germ("vars x y\nx^2 - y^2; 2*x*y")
    out = gauss_newton(g, [0.9, 0.1], [1.0, 0.0])
    assert out.converged and np.allclose(out.x, [1.0, 0.0])


def test_fiber_walk_projection(corpus):
    path = fiber_walk(corpus["projection"], [0.1, 0.2, 0.0], steps=30, step_size=0.05, seed=4)
    assert np.allclose(path.points[:, :2], [0.1, 0.2], atol=1e-12)
    assert np.max(path.residuals) <= 1e-9


def test_fiber_walk_residuals_and_stop(corpus):
    g = corpus["example1"]
    x0 = np.array([0.2, 0.1, 0.05])
    path = fiber_walk(g, x0, steps=40, step_size=0.05, eps=0.5, seed=1)
    assert np.max(path.residuals) <= 1e-9
    assert np.all(np.linalg.norm(path.points, axis=1) <= 0.5)
    c = g(x0)
    assert all(np.linalg.norm(g(x) - c) <= 1e-9 for x in path.points)


def test_fiber_walk_kernel_trivial(corpus):
    with pytest.raises(KernelTrivial):
        fiber_walk(corpus["squaring"], [1.0, 0.0])


def test_fiber_walk_correction_failure(corpus, monkeypatch):
    import milnor.fibers as fibers

    def stuck(germ, x0, c, *a, **k):
        return fibers.NewtonResult(np.asarray(x0), 1.0, fibers.MAX_ITER, False, "max iterations")

    monkeypatch.setattr(fibers, "gauss_newton", stuck)
    with pytest.raises(CorrectionFailed):
        fiber_walk(corpus["projection"], [0.1, 0.2, 0.0], steps=3)


def test_milnor_tube(corpus):
    delta = 0.1
    tube = milnor_tube_sample(corpus["projection"], 0.5, delta, n_values=6, count=5)
    for fs in tube:
        assert abs(np.linalg.norm(fs.target) - delta) <= 1e-12
        for x in fs.points:
            assert abs(np.linalg.norm(corpus["projection"](x)) - delta) <= 1e-8
    sq = milnor_tube_sample(corpus["squaring"], 1.0, delta, n_values=4, count=20)
    for fs in sq:
        assert len(fs.points) == 2
        assert np.allclose(np.linalg.norm(fs.points, axis=1), math.sqrt(delta))
    assert point_cloud_header(3, 2) == ["x1", "x2", "x3", "c1", "c2", "residual"]


def test_e_theta_projection_alpha_zero(corpus):
    g = corpus["projection"]
    theta = np.array([0.0, ETA])
    es = e_theta_sample(g, ConicParameter((0.0, 0.0), ETA), theta, 1.0, n_curve=5, count=10)
    for y, fs in zip(es.curve, es.fibers):
        for x in fs.points:
            assert np.linalg.norm(g(x) - y) <= 1e-8
            assert abs(x[0]) <= 1e-10 and x[1] > 0       # half-plane strip x1 = 0, x2 > 0


def test_e_theta_squaring_two_rays(corpus):
    g = corpus["squaring"]
    ang = 1.2
    theta = ETA * np.array([math.cos(ang), math.sin(ang)])
    es = e_theta_sample(g, ConicParameter((0.0, 0.0), ETA), theta, 1.0, n_curve=4, count=30)
    for fs in es.fibers:
        angles = sorted(np.mod(np.arctan2(fs.points[:, 1], fs.points[:, 0]), 2 * np.pi))
        assert np.allclose(angles, [ang / 2, ang / 2 + np.pi], atol=1e-8)


def test_e_theta_contract_and_cross_check(corpus):
    g = corpus["example1"]
    cp = ConicParameter((0.3, -0.2), ETA)
    theta = np.array([ETA, 0.0])
    es = e_theta_sample(g, cp, theta, 0.5, n_curve=5, count=10, seed=3)
    checks = []
    for t, y, fs in zip(es.t, es.curve, es.fibers):
        tangent = curve_tangent(cp, theta, float(t))
        for x in fs.points:
            assert np.linalg.norm(g(x) - y) <= 1e-8
            checks.append(e_theta_tangency(g, cp, theta, x, tangent=tangent))
    scored = [c for c in checks if c.suitable is not None and c.margin > 2e-8]
    assert scored
    agree = sum(c.transverse == c.suitable for c in scored)
    assert agree / len(scored) >= 0.95


def test_curve_tangent_matches_field():
    cp = ConicParameter((0.4, 0.1), ETA)
    theta = ETA * np.array([0.6, 0.8])
    from milnor.flows import conic_field, flow_to
    t = 0.3
    y = flow_to(cp, theta, t).endpoint
    v = conic_field(cp, y)
    c = curve_tangent(cp, theta, t)
    assert np.allclose(c, v / np.linalg.norm(v), atol=1e-6)
