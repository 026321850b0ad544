import numpy as np
import pytest

from milnor.sampling import (RNG_ALGORITHM, RejectionBudgetExhausted, SamplingPlan, rng,
                             sample_ball, sample_region, sample_sphere)


def test_sphere_norms_and_determinism():
    a = sample_sphere(3, 0.7, 500, seed=42)
    assert np.allclose(np.linalg.norm(a, axis=1), 0.7, atol=1e-12)
    assert np.array_equal(a, sample_sphere(3, 0.7, 500, seed=42))
    assert not np.array_equal(a, sample_sphere(3, 0.7, 500, seed=43))
    assert not np.array_equal(a, sample_sphere(3, 0.7, 500, seed=42, stream=1))


def test_sphere_mean_concentration():
    r = 1.3
    pts = sample_sphere(3, r, 10_000, seed=0)
    assert np.linalg.norm(pts.mean(axis=0)) <= 4 * r / np.sqrt(10_000)


def test_ball_inside():
    pts = sample_ball(4, 0.5, 1000, seed=1, center=[1, 0, 0, 0])
    assert np.all(np.linalg.norm(pts - [1, 0, 0, 0], axis=1) <= 0.5)


def test_plan_validation_and_strata():
    with pytest.raises(ValueError):
        SamplingPlan(count=0)
    with pytest.raises(ValueError):
        SamplingPlan(radii=(0.1, -0.2))
    with pytest.raises(ValueError):
        SamplingPlan(seed=-1)
    s = SamplingPlan().strata(0.5)
    assert s[-1] == 0.5 and s[0] == pytest.approx(0.05) and len(s) == 4
    s = SamplingPlan(radii=(0.1, 0.3)).strata(0.5)
    assert s == (0.1, 0.3, 0.5)
    with pytest.raises(ValueError):
        SamplingPlan(radii=(0.6,)).strata(0.5)


def test_rng_streams_are_documented():
    assert "PCG64" in RNG_ALGORITHM and "SeedSequence" in RNG_ALGORITHM
    assert rng(7, 3).random() == rng(7, 3).random()


def test_outside_tube_projection(corpus):
    g = corpus["projection"]
    rs = sample_region(g, 0.5, 0.1, "outside-tube", SamplingPlan(count=50))
    assert np.all(np.linalg.norm(rs.points[:, :2], axis=1) >= 0.1)
    assert np.all(np.linalg.norm(rs.points, axis=1) <= 0.5 * (1 + 1e-12))
    again = sample_region(g, 0.5, 0.1, "outside-tube", SamplingPlan(count=50))
    assert np.array_equal(rs.points, again.points)


def test_punctured_ball_strata(corpus):
    g = corpus["squaring"]
    rs = sample_region(g, 0.5, 0.0, "punctured-ball", SamplingPlan(count=10))
    assert len(rs.points) == 40
    assert set(np.round(rs.radii, 12)) == set(np.round(SamplingPlan().strata(0.5), 12))
    assert np.allclose(np.linalg.norm(rs.points, axis=1), rs.radii)


def test_tube_boundary(corpus):
    g = corpus["squaring"]
    rs = sample_region(g, 0.5, 0.1, "tube-boundary", SamplingPlan(count=20))
    vals = np.linalg.norm([g(x) for x in rs.points], axis=1)
    assert np.allclose(vals, 0.1, atol=1e-12)
    with pytest.raises(RejectionBudgetExhausted) as info:
        sample_region(g, 0.5, 0.3, "tube-boundary", SamplingPlan(count=5, rejection_budget=20))
    assert info.value.acceptance_rate == 0.0


def test_unknown_mode(corpus):
    with pytest.raises(ValueError):
        sample_region(corpus["squaring"], 0.5, 0.1, "nowhere", SamplingPlan())
