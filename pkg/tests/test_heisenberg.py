import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hopfdec.heisenberg import (
    CONTACT_TOL, HeisPoint, NonHorizontalError, TangentVector, cc_distance, cc_length,
    contact_form, contact_residuals, euclidean_distance, frame_at, group_inv, group_mul,
    horizontal_norm, left_translation_matrix, lift_curve, metric_comparison_check, cc_lower_bound,
    start_upper_bound)
from oracles import cc_distance_exact

coord = st.floats(-3, 3, allow_nan=False)


def point(n=1):
    return st.lists(coord, min_size=2 * n + 1, max_size=2 * n + 1).map(HeisPoint.from_coords)


def test_group_product_fixture():
    p = HeisPoint(np.array([1.0, 0.0]), 0.0)
    q = HeisPoint(np.array([0.0, 1.0]), 0.0)
    assert np.array_equal(group_mul(p, q).coords, [1.0, 1.0, -2.0])
    assert np.array_equal(group_mul(q, p).coords, [1.0, 1.0, 2.0])


def test_identity_and_inverse():
    p = HeisPoint(np.array([0.3, -1.2, 2.0, 0.5]), 0.7)
    e = HeisPoint.identity(2)
    assert group_mul(p, e) == p and group_mul(e, p) == p
    assert group_mul(p, group_inv(p)) == e


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        group_mul(HeisPoint.identity(1), HeisPoint.identity(2))
    with pytest.raises(ValueError):
        HeisPoint(np.array([1.0, 2.0, 3.0]), 0.0)


@settings(max_examples=200, deadline=None)
@given(point(2), point(2), point(2))
def test_associativity(p, q, r):
    a = group_mul(group_mul(p, q), r).coords
    b = group_mul(p, group_mul(q, r)).coords
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


@settings(max_examples=100, deadline=None)
@given(point(2), point(2))
def test_frame_left_invariant(g, p):
    # dL_g maps the frame at p exactly onto the frame at g * p
    m = left_translation_matrix(g)
    moved = [m @ v.components for v in frame_at(p)]
    target = [v.components for v in frame_at(group_mul(g, p))]
    for a, b in zip(moved, target):
        assert np.max(np.abs(a - b)) <= 4 * np.finfo(float).eps * max(1.0, np.max(np.abs(b)))


def test_left_translation_matrix_is_differential():
    g = HeisPoint(np.array([0.4, -0.7]), 1.3)
    p = HeisPoint(np.array([1.1, 0.2]), -0.5)
    v = np.array([0.3, -0.9, 0.25])
    h = 1e-6
    fd = (group_mul(g, HeisPoint.from_coords(p.coords + h * v)).coords
          - group_mul(g, HeisPoint.from_coords(p.coords - h * v)).coords) / (2 * h)
    assert np.allclose(left_translation_matrix(g) @ v, fd, atol=1e-8)


def test_contact_form_on_frame():
    p = HeisPoint(np.array([0.5, -2.0, 1.5, 0.25]), 3.0)
    frame = frame_at(p)
    for v in frame[:-1]:
        assert abs(contact_form(p, v)) <= 1e-15
    assert contact_form(p, frame[-1]) == 1.0


def test_horizontal_norm():
    p = HeisPoint(np.array([1.0, 2.0]), 0.0)
    x, y, t = frame_at(p)
    assert horizontal_norm(p, 3 * x + 4 * y) == pytest.approx(5.0)
    with pytest.raises(NonHorizontalError):
        horizontal_norm(p, t)


def test_tangent_vector_validation():
    p = HeisPoint.identity(1)
    with pytest.raises(ValueError):
        TangentVector(p, [1.0, 2.0])
    with pytest.raises(ValueError):
        TangentVector(p, [1, 0, 0]) + TangentVector(HeisPoint(np.ones(2), 0.0), [1, 0, 0])


def test_straight_segment_lift():
    s = np.linspace(0, 2.5, 11)
    curve = lift_curve(np.column_stack([s, np.zeros_like(s)]))
    assert np.all(curve.t_samples == 0.0)
    assert cc_length(curve) == pytest.approx(2.5, abs=1e-14)


def test_circle_lift_vertical_shift():
    n = 10_000
    s = 2 * np.pi * np.arange(n + 1) / n
    curve = lift_curve(np.column_stack([np.cos(s), np.sin(s)]), 0.0, s)
    # counterclockwise unit circle: area pi, shift -4 pi
    assert abs(curve.t_samples[-1] - curve.t_samples[0] + 4 * np.pi) <= 1e-6
    assert np.max(np.abs(contact_residuals(curve))) <= CONTACT_TOL


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_lift_is_horizontal_and_projects(seed, n):
    rng = np.random.default_rng(seed)
    base = np.cumsum(rng.standard_normal((40, 2 * n)) * 0.3, axis=0)
    curve = lift_curve(base, t0=rng.normal())
    res = np.abs(contact_residuals(curve))
    scale = max(1.0, np.max(np.abs(curve.points)))
    assert np.max(res) <= CONTACT_TOL * scale
    planar = np.sum(np.linalg.norm(np.diff(base, axis=0), axis=1))
    assert cc_length(curve) == pytest.approx(planar, rel=1e-12)


def test_lift_validation():
    with pytest.raises(ValueError):
        lift_curve(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        lift_curve(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        lift_curve(np.zeros((3, 2)), parameter_values=[0, 2, 1])


def test_cc_distance_trivial_and_planar():
    p = HeisPoint(np.array([0.2, 0.1]), 0.4)
    rep = cc_distance(p, p)
    assert rep.distance_upper == 0.0 and rep.lower_bound == 0.0
    o = HeisPoint.identity(1)
    rep = cc_distance(o, HeisPoint(np.array([1.0, 0.0]), 0.0))
    assert rep.distance_upper == pytest.approx(1.0, rel=0.01)
    assert rep.lower_bound == 1.0


def test_cc_distance_vertical_against_closed_form():
    o = HeisPoint.identity(1)
    rep = cc_distance(o, HeisPoint(np.zeros(2), 1.0))
    exact = np.sqrt(np.pi)
    assert rep.lower_bound == 0.0
    assert exact <= rep.distance_upper <= 1.01 * exact
    assert rep.certified_lower <= exact


def test_cc_distance_bounds_sandwich_exact():
    rng = np.random.default_rng(11)
    for _ in range(12):
        p = HeisPoint.from_coords(rng.uniform(-1, 1, 3))
        q = HeisPoint.from_coords(rng.uniform(-1, 1, 3))
        rel = group_mul(group_inv(p), q)
        exact = cc_distance_exact(rel.z, rel.t)
        rep = cc_distance(p, q)
        assert rep.certified_lower <= exact * (1 + 1e-12)
        assert exact * (1 - 1e-9) <= rep.distance_upper <= 1.03 * exact
        # the returned curve is an honest horizontal path from p to q
        pts = rep.curve.points
        assert np.allclose(pts[0], p.coords, atol=1e-12)
        assert np.allclose(pts[-1], q.coords, atol=1e-10)
        assert np.max(np.abs(contact_residuals(rep.curve))) <= 1e-9
        assert cc_length(rep.curve) == pytest.approx(rep.distance_upper, rel=1e-12)


def test_cc_distance_symmetry_and_left_invariance():
    rng = np.random.default_rng(5)
    g = HeisPoint.from_coords(rng.uniform(-1, 1, 3))
    for _ in range(5):
        p = HeisPoint.from_coords(rng.uniform(-1, 1, 3))
        q = HeisPoint.from_coords(rng.uniform(-1, 1, 3))
        d_pq = cc_distance(p, q).distance_upper
        d_qp = cc_distance(q, p).distance_upper
        d_g = cc_distance(group_mul(g, p), group_mul(g, q)).distance_upper
        assert abs(d_pq - d_qp) <= 0.02 * 0.5 * (d_pq + d_qp)
        assert abs(d_g - d_pq) <= 0.02 * d_pq


def test_cc_distance_higher_n():
    o = HeisPoint.identity(2)
    q = HeisPoint(np.array([0.3, 0.0, 0.0, 0.4]), 0.6)
    rep = cc_distance(o, q)
    exact = cc_distance_exact(q.z, q.t)
    assert exact * (1 - 1e-9) <= rep.distance_upper <= 1.03 * exact


def test_metric_comparison():
    rng = np.random.default_rng(2)
    pairs = [(HeisPoint.from_coords(rng.uniform(-1, 1, 3)),
              HeisPoint.from_coords(rng.uniform(-1, 1, 3))) for _ in range(10)]
    pairs.append((pairs[0][0], pairs[0][0]))
    c_lower, c_upper = metric_comparison_check(pairs)
    assert np.isfinite(c_lower) and np.isfinite(c_upper)
    assert c_lower > 0 and c_upper > 0
    for p, q in pairs:
        e = euclidean_distance(p, q)
        if e:
            d = cc_distance(p, q)
            assert e / c_lower <= d.distance_upper * (1 + 1e-12)
            assert d.distance_upper <= c_upper * np.sqrt(e) * (1 + 1e-12)
    with pytest.raises(ValueError):
        metric_comparison_check([])


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 3), st.floats(-10, 10))
def test_certified_lower_bound_never_exceeds_exact(planar, tau):
    w = np.array([planar, 0.0])
    p, q = HeisPoint.identity(1), HeisPoint(w, tau)
    assert cc_lower_bound(p, q) <= cc_distance_exact(w, tau) * (1 + 1e-12)


def test_reflection_bound_is_active_for_mixed_pairs():
    # |w| = 1, tau = 4: the path-plus-chord bound gives sqrt(4 pi) - 1 ~ 2.545,
    # the mirrored loop sqrt(2 pi) ~ 2.507, the planar bound 1
    p, q = HeisPoint.identity(1), HeisPoint(np.array([1.0, 0.0]), 4.0)
    assert cc_lower_bound(p, q) == pytest.approx(np.sqrt(4 * np.pi) - 1)
    q = HeisPoint(np.array([2.0, 0.0]), 4.0)
    assert cc_lower_bound(p, q) == pytest.approx(np.sqrt(2 * np.pi))


def test_start_upper_bound_dominates_optimizer():
    rng = np.random.default_rng(11)
    for _ in range(10):
        p, q = (HeisPoint.from_coords(rng.uniform(-1, 1, 3)) for _ in range(2))
        start = start_upper_bound(p, q)
        d = cc_distance(p, q).distance_upper
        assert d <= start * (1 + 1e-3)
        assert start >= cc_lower_bound(p, q)
    assert start_upper_bound(p, p) == 0.0


def test_pruned_metric_check_matches_full_scan():
    rng = np.random.default_rng(4)
    pairs = [tuple(HeisPoint.from_coords(rng.uniform(-1, 1, 3)) for _ in range(2))
             for _ in range(25)]
    assert metric_comparison_check(pairs) == metric_comparison_check(pairs, prune=False)
