import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from milnor.flows import (AlphaZero, ConicParameter, DegenerateDenominator, DomainError,
                          clear_cache, conic_field, curve_C, example1_h, example1_h_inv,
                          example1_report, field_zeros, flow_to, h_apply, h_invert, nontrivial_zero,
                          normalized_field, set_cache_enabled, verify_conic_axioms)
from milnor.sampling import SamplingPlan, sample_ball

ETA = 0.9
HALF = ConicParameter((-0.5, -0.5), ETA)


def test_parameter_validation():
    with pytest.raises(ValueError):
        ConicParameter((0.8, 0.6), ETA)
    with pytest.raises(ValueError):
        ConicParameter((0.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        ConicParameter((0.0, 0.0), 0.0)
    assert ConicParameter([0.1, 0.2]).alpha == (0.1, 0.2)


def test_conic_field_examples():
    y = np.array([0.3, -0.4])
    assert np.array_equal(conic_field(ConicParameter((0.0, 0.0)), y), y)
    assert np.allclose(conic_field(HALF, [0.2, 0.0]), [0.18, -0.02], atol=1e-15)
    assert np.array_equal(conic_field(HALF, [0.0, 0.0]), [0.0, 0.0])
    with pytest.raises(ValueError):
        conic_field(HALF, [1.0, 2.0, 3.0])


def test_nontrivial_zero_examples():
    assert np.allclose(nontrivial_zero(HALF), [1.0, 1.0])
    assert np.allclose(nontrivial_zero(ConicParameter((0.6, 0.0))), [-5 / 3, 0.0])
    with pytest.raises(AlphaZero):
        nontrivial_zero(ConicParameter((0.0, 0.0)))
    for a in sample_ball(3, 0.99, 50, seed=3):
        cp = ConicParameter(tuple(a))
        z = nontrivial_zero(cp)
        assert abs(np.linalg.norm(z) * np.linalg.norm(a) - 1.0) <= 1e-12
        assert np.linalg.norm(conic_field(cp, z)) <= 1e-12


def test_field_zeros_grid_search():
    # Inside B_1 only the origin; a wider ball also catches -a/|a|^2.
    assert np.allclose(field_zeros(HALF), [[0.0, 0.0]], atol=1e-10)
    wide = field_zeros(HALF, grid=31, radius=1.5)
    assert len(wide) == 2
    assert min(np.linalg.norm(wide - [1.0, 1.0], axis=1)) <= 1e-10


def test_normalized_field_examples():
    y = np.array([0.3, 0.1])
    assert np.allclose(normalized_field(ConicParameter((0.0, 0.0)), y), y / (2 * (y @ y)))
    assert np.allclose(normalized_field(HALF, [0.2, 0.0]), [2.5, -0.02 / 0.072])
    for a, y in zip(sample_ball(2, 0.99, 200, seed=1), sample_ball(2, 0.99, 200, seed=2)):
        out = normalized_field(ConicParameter(tuple(a)), y)
        assert abs(2 * float(y @ out) - 1.0) <= 1e-12
    with pytest.raises(DegenerateDenominator):
        normalized_field(HALF, [0.0, 0.0])
    # At the nontrivial zero (outside the unit ball) the field itself vanishes.
    with pytest.raises(DegenerateDenominator):
        normalized_field(HALF, [1.0, 1.0])


def test_flow_radial_closed_form():
    cp = ConicParameter((0.0, 0.0), ETA)
    theta = np.array([0.0, ETA])
    for t in (ETA ** 2 / 4, 1e-3, 1e-4 * ETA ** 2):
        tr = flow_to(cp, theta, t)
        assert np.allclose(tr.endpoint, math.sqrt(t) / ETA * theta, atol=1e-12)


def test_flow_trivial_and_domain():
    theta = np.array([ETA, 0.0])
    tr = flow_to(HALF, theta, ETA ** 2)
    assert tr.t.tolist() == [ETA ** 2] and np.array_equal(tr.endpoint, theta)
    with pytest.raises(DomainError):
        flow_to(HALF, [0.5, 0.0], 0.1)
    with pytest.raises(DomainError):
        flow_to(HALF, theta, 0.0)
    with pytest.raises(DomainError):
        flow_to(HALF, theta, 1.0)


def test_flow_invariant_and_monotone():
    theta = ETA * np.array([math.cos(2.0), math.sin(2.0)])
    for alpha in [(-0.5, -0.5), (0.7, 0.1), (0.0, -0.95)]:
        tr = flow_to(ConicParameter(alpha, ETA), theta, 1e-4 * ETA ** 2)
        assert tr.max_defect <= 1e-9
        assert tr.invariant_residual() <= 1e-12
        assert np.all(np.diff(tr.t) < 0)


def test_curve_C():
    theta = np.array([0.0, -ETA])
    tr = curve_C(ConicParameter((0.0, 0.0), ETA), theta, 7)
    assert len(tr.t) == 7 and tr.t[0] == ETA ** 2 and tr.t[-1] == pytest.approx(1e-4 * ETA ** 2)
    assert np.allclose(tr.points[:, 0], 0.0, atol=1e-14)           # straight radial segment
    assert np.array_equal(tr.points[0], theta)
    tr = curve_C(HALF, theta, 9)
    assert tr.invariant_residual() <= 1e-9
    assert np.allclose(np.sum(tr.points ** 2, axis=1), tr.t, atol=1e-12)
    with pytest.raises(ValueError):
        curve_C(HALF, theta, 1)


def test_h_apply_examples():
    assert np.array_equal(h_apply(HALF, [0.0, 0.0]), [0.0, 0.0])
    theta = ETA * np.array([0.6, -0.8])
    assert np.allclose(h_apply(HALF, theta), theta, atol=1e-12)
    cp0 = ConicParameter((0.0, 0.0), ETA)
    x = np.array([0.09, 0.0])
    assert np.allclose(h_apply(cp0, x), math.sqrt(ETA / 0.09) * x, atol=1e-12)
    assert np.linalg.norm(h_apply(cp0, x)) == pytest.approx(math.sqrt(0.9 * 0.09), abs=1e-12)
    with pytest.raises(DomainError):
        h_apply(HALF, [1.0, 0.0])


def test_h_invert_examples():
    theta = ETA * np.array([0.6, 0.8])
    assert np.allclose(h_invert(HALF, theta), theta, atol=1e-12)
    cp0 = ConicParameter((0.0, 0.0), ETA)
    y = np.array([0.2, -0.3])
    assert np.allclose(h_invert(cp0, y), np.linalg.norm(y) / ETA * y, atol=1e-12)
    with pytest.raises(DomainError):
        h_invert(HALF, [0.0, 0.0])


def test_norm_law_and_round_trip():
    for a in sample_ball(2, 0.95, 3, seed=9):
        cp = ConicParameter(tuple(a), ETA)
        for x in sample_ball(2, ETA, 20, seed=10):
            hx = h_apply(cp, x)
            assert abs(np.linalg.norm(hx) - math.sqrt(ETA * np.linalg.norm(x))) <= 1e-8
            assert np.linalg.norm(h_invert(cp, hx) - x) <= 1e-6


def test_cache_is_transparent_and_thread_safe():
    xs = sample_ball(2, ETA, 40, seed=4)
    set_cache_enabled(False)
    ref = [h_apply(HALF, x) for x in xs]
    set_cache_enabled(True)
    with ThreadPoolExecutor(4) as ex:
        par = list(ex.map(lambda x: h_apply(HALF, x), list(xs) * 2))
    for a, b in zip(ref * 2, par):
        assert np.array_equal(a, b)
    clear_cache()


def test_example1_closed_forms_are_evaluated_and_reported():
    assert np.array_equal(example1_h(ETA, [0.0, 0.0]), [0.0, 0.0])
    assert np.array_equal(example1_h_inv(ETA, [0.0, 0.0]), [0.0, 0.0])
    with pytest.raises(DomainError):
        example1_h(ETA, [1.0, 0.0])
    rep = example1_report(ETA, count=50, seed=1)
    s = rep.summary()
    assert s["samples"] == 50
    assert np.all(np.isfinite(rep.overlap_differences))
    assert len(s["notes"]) == 2
    # Measured, not asserted: residuals are finite numbers or recorded failures.
    assert rep.roundtrip_residuals.shape == (50,)


def test_example1_branches_disagree_for_negative_first_coordinate():
    # The printed branches differ in sign conventions; this is reported, not fixed.
    y = np.array([-0.3, 0.2])
    d = np.linalg.norm(example1_h(ETA, y, 1) - example1_h(ETA, y, 2))
    assert d > 1e-3


def test_verify_axioms_identity_passes():
    rep = verify_conic_axioms(lambda x: np.asarray(x), lambda y: np.asarray(y), ETA)
    assert rep.passed
    assert rep.min_submersion_margin == pytest.approx(1.0, abs=1e-8)


def test_verify_axioms_flow_homeomorphism():
    cp = ConicParameter((0.3, -0.4), ETA)
    rep = verify_conic_axioms(lambda x: h_apply(cp, x), lambda y: h_invert(cp, y), ETA,
                              plan=SamplingPlan(count=8))
    assert rep.passed and rep.min_submersion_margin > 0


def test_verify_axioms_collapse_fails_submersion():
    collapse = lambda y: np.array([y[0], 0.0])  # noqa: E731
    rep = verify_conic_axioms(collapse, collapse, ETA, plan=SamplingPlan(count=5))
    assert not rep.passed
    assert all(not s.submersion for s in rep.samples)


def test_verify_axioms_records_callback_errors():
    def boom(y):
        raise RuntimeError("nope")

    rep = verify_conic_axioms(boom, boom, ETA, plan=SamplingPlan(count=3))
    assert not rep.passed and all("RuntimeError" in s.error for s in rep.samples)
