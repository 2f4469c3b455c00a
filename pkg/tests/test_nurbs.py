import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowlab import nurbs
from flowlab.nurbs import (
    NurbsCurve,
    NurbsSurface,
    bspline_basis,
    closest_point,
    curve_curvature,
    curve_domain,
    curve_eval,
    make_unit_circle,
    orthonormal_frame,
    parameter_at_value,
    parametric_displacement,
    read_curve_text,
    rotation_matrix,
    surface_eval,
    surface_tangents,
    write_curve_text,
)


def clamped_knots(degree, n_basis, interior=()):
    return np.concatenate([
        np.zeros(degree + 1), np.sort(np.asarray(interior, dtype=float)),
        np.ones(degree + 1),
    ])


# ---------------------------------------------------------------------------
# basis functions


def test_basis_partition_of_unity():
    knots = clamped_knots(3, 6, interior=[0.3, 0.7])
    theta = np.linspace(0.0, 1.0, 257)
    B = bspline_basis(3, knots, theta)[0]
    assert np.abs(B.sum(axis=1) - 1.0).max() < 1e-13
    assert B.min() >= -1e-14


def test_basis_derivative_sums_to_zero():
    knots = clamped_knots(2, 5, interior=[0.25, 0.5])
    theta = np.linspace(0.01, 0.99, 101)
    B0, B1 = bspline_basis(2, knots, theta, order=1)
    assert np.abs(B1.sum(axis=1)).max() < 1e-12


def test_basis_reproduces_bernstein():
    # no interior knots: the basis is the Bernstein basis of the degree
    knots = clamped_knots(3, 4)
    theta = np.linspace(0.0, 1.0, 33)
    B = bspline_basis(3, knots, theta)[0]
    from math import comb
    bern = np.stack([comb(3, i) * theta**i * (1 - theta) ** (3 - i)
                     for i in range(4)], axis=1)
    assert np.abs(B - bern).max() < 1e-14


@settings(max_examples=40, deadline=None)
@given(
    degree=st.integers(min_value=1, max_value=4),
    interior=st.lists(st.floats(min_value=0.05, max_value=0.95), max_size=4),
)
def test_basis_partition_of_unity_fuzzed(degree, interior):
    knots = clamped_knots(degree, degree + 1 + len(interior), interior)
    theta = np.linspace(0.0, 1.0, 97)
    B = bspline_basis(degree, knots, theta)[0]
    assert np.abs(B.sum(axis=1) - 1.0).max() < 1e-13


# ---------------------------------------------------------------------------
# curve construction and validation


def test_curve_rejects_bad_knot_count():
    with pytest.raises(ValueError):
        NurbsCurve(2, [0, 0, 0, 1, 1], [[0, 0], [1, 0], [1, 1]], [1, 1, 1])


def test_curve_rejects_decreasing_knots():
    with pytest.raises(ValueError):
        NurbsCurve(1, [0, 0.5, 0.2, 1], [[0, 0], [1, 1]], [1, 1])


def test_curve_rejects_nonpositive_weights():
    with pytest.raises(ValueError):
        NurbsCurve(1, [0, 0, 1, 1], [[0, 0], [1, 1]], [1, 0])


def test_planar_control_points_are_padded():
    c = NurbsCurve(1, [0, 0, 1, 1], [[0, 0], [2, 1]], [1, 1])
    assert c.control_points.shape == (2, 3)
    assert np.all(c.control_points[:, 2] == 0.0)


# ---------------------------------------------------------------------------
# the rational circle


def test_unit_circle_radius_everywhere():
    circle = make_unit_circle()
    lo, hi = curve_domain(circle)
    theta = np.linspace(lo, hi, 1000)
    pts = curve_eval(circle, theta)
    r = np.hypot(pts[:, 0], pts[:, 1])
    assert np.abs(r - 1.0).max() < 1e-13


def test_unit_circle_starts_at_bottom_and_runs_ccw():
    circle = make_unit_circle()
    pts = curve_eval(circle, [0.0, 0.25, 0.5, 0.75])
    assert np.allclose(pts[0, :2], [0.0, -1.0], atol=1e-14)
    assert np.allclose(pts[1, :2], [1.0, 0.0], atol=1e-14)
    assert np.allclose(pts[2, :2], [0.0, 1.0], atol=1e-14)
    assert np.allclose(pts[3, :2], [-1.0, 0.0], atol=1e-14)


def test_circle_curvature_is_exactly_inverse_radius():
    circle = make_unit_circle()
    half = NurbsCurve(circle.degree, circle.knots,
                      0.5 * circle.control_points, circle.weights)
    theta = np.linspace(0.0, 1.0, 400)
    kappa = curve_curvature(half, theta)
    assert np.abs(kappa - 2.0).max() < 1e-10


def test_curve_derivatives_match_finite_differences():
    circle = make_unit_circle()
    rng = np.random.default_rng(7)
    theta = rng.uniform(0.02, 0.98, size=50)
    h = 1e-6
    C, C1, C2 = curve_eval(circle, theta, order=2)
    Cp = curve_eval(circle, theta + h)
    Cm = curve_eval(circle, theta - h)
    fd1 = (Cp - Cm) / (2 * h)
    fd2 = (Cp - 2 * C + Cm) / h**2
    scale1 = np.abs(C1).max()
    scale2 = np.abs(C2).max()
    assert np.abs(C1 - fd1).max() / scale1 < 1e-6
    assert np.abs(C2 - fd2).max() / scale2 < 1e-4


def test_curvature_raises_on_vanishing_tangent():
    # coincident first control points make C'(0) = 2 (P1 - P0) = 0
    c = NurbsCurve(2, [0, 0, 0, 1, 1, 1],
                   [[0, 0], [0, 0], [1, 1]], np.ones(3))
    with pytest.raises(ValueError):
        curve_curvature(c, [0.0])


# ---------------------------------------------------------------------------
# point location on curves


def test_closest_point_on_circle():
    circle = make_unit_circle()
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(-2, 2, size=2)
        r = np.hypot(*x)
        if r < 0.1:
            continue
        theta, point, dist = closest_point(circle, x)
        assert abs(dist - abs(r - 1.0)) < 1e-9
        assert np.abs(point[:2] - x / r).max() < 1e-8


def test_closest_point_at_curve_point_is_exact():
    circle = make_unit_circle()
    target = curve_eval(circle, [0.37])[0]
    theta, point, dist = closest_point(circle, target[:2])
    assert dist < 1e-10
    assert abs(theta - 0.37) < 1e-8


def test_parameter_at_value_brackets_coordinate():
    circle = make_unit_circle()
    # x rises from 0 to 1 on the first quarter
    th = parameter_at_value(circle, 0, 0.5, 0.0, 0.25)
    pt = curve_eval(circle, [th])[0]
    assert abs(pt[0] - 0.5) < 1e-12
    with pytest.raises(ValueError):
        parameter_at_value(circle, 0, 2.0, 0.0, 0.25)


# ---------------------------------------------------------------------------
# frames and slip updates


def test_orthonormal_frame_curve():
    t1n, n = orthonormal_frame(np.array([3.0, 4.0]))
    assert np.allclose(t1n, [0.6, 0.8])
    assert abs(t1n @ n) < 1e-15
    # normal is the tangent rotated +90 degrees
    assert np.allclose(n, [-0.8, 0.6])


def test_rotation_matrix_is_proper():
    R = rotation_matrix(orthonormal_frame(np.array([1.0, 2.0])))
    assert np.allclose(R.T @ R, np.eye(2), atol=1e-14)
    assert np.linalg.det(R) > 0


def test_orthonormal_frame_rejects_degenerate():
    with pytest.raises(ValueError):
        orthonormal_frame(np.zeros(2))
    with pytest.raises(ValueError):
        orthonormal_frame(np.array([1.0, 0, 0]), np.array([2.0, 0, 0]))


def test_parametric_displacement_tracks_curve():
    circle = make_unit_circle()
    theta = 0.13
    C, C1 = curve_eval(circle, [theta], order=1)
    d = 1e-4 * C1[0] / np.linalg.norm(C1[0])
    dth = parametric_displacement(circle, theta, d)
    moved = curve_eval(circle, [theta + dth[0]])[0]
    assert np.linalg.norm(moved - (C[0] + d)) < 1e-6


def test_parametric_displacement_ignores_normal_motion():
    circle = make_unit_circle()
    C, C1 = curve_eval(circle, [0.4], order=1)
    t = C1[0] / np.linalg.norm(C1[0])
    normal = np.array([t[1], -t[0], 0.0])
    dth = parametric_displacement(circle, 0.4, 0.01 * normal)
    assert abs(dth[0]) < 1e-12


# ---------------------------------------------------------------------------
# surfaces


def ruled_strip():
    # bilinear patch z = x * y over the unit square
    cp = np.array([[[0, 0, 0], [0, 1, 0]], [[1, 0, 0], [1, 1, 1]]], dtype=float)
    w = np.ones((2, 2))
    k = np.array([0.0, 0.0, 1.0, 1.0])
    return NurbsSurface(1, 1, k, k, cp, w)


def test_surface_eval_bilinear():
    surf = ruled_strip()
    u = np.array([0.0, 0.5, 1.0, 0.25])
    v = np.array([0.0, 0.5, 0.5, 0.75])
    S = surface_eval(surf, u, v)
    assert np.abs(S[:, 0] - u).max() < 1e-14
    assert np.abs(S[:, 1] - v).max() < 1e-14
    assert np.abs(S[:, 2] - u * v).max() < 1e-14


def test_surface_tangents_match_finite_differences():
    surf = ruled_strip()
    u = np.array([0.3])
    v = np.array([0.6])
    S, t1, t2 = surface_tangents(surf, u, v)
    h = 1e-7
    fd_u = (surface_eval(surf, u + h, v) - surface_eval(surf, u - h, v)) / (2 * h)
    fd_v = (surface_eval(surf, u, v + h) - surface_eval(surf, u, v - h)) / (2 * h)
    assert np.abs(t1 - fd_u).max() < 1e-6
    assert np.abs(t2 - fd_v).max() < 1e-6


def test_surface_frame_and_slip_update():
    surf = ruled_strip()
    S, t1, t2 = surface_tangents(surf, [0.5], [0.5])
    frame = orthonormal_frame(t1[0], t2[0])
    R = rotation_matrix(frame)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
    d = 1e-5 * t1[0]
    dp = parametric_displacement(surf, (0.5, 0.5), d)
    moved = surface_eval(surf, [0.5 + dp[0]], [0.5 + dp[1]])[0]
    assert np.linalg.norm(moved - (S[0] + d)) < 1e-8


def test_surface_shape_validation():
    cp = np.zeros((2, 2, 3))
    with pytest.raises(ValueError):
        NurbsSurface(1, 1, [0, 0, 1, 1], [0, 0, 1], cp, np.ones((2, 2)))
    with pytest.raises(ValueError):
        NurbsSurface(1, 1, [0, 0, 1, 1], [0, 0, 1, 1], cp, np.ones(4))


# ---------------------------------------------------------------------------
# serialization


def test_curve_text_round_trip(tmp_path):
    circle = make_unit_circle()
    path = tmp_path / "circle.txt"
    write_curve_text(path, circle)
    back = read_curve_text(path)
    assert back.degree == circle.degree
    assert np.array_equal(back.knots, circle.knots)
    assert np.array_equal(back.control_points, circle.control_points)
    assert np.array_equal(back.weights, circle.weights)
    theta = np.linspace(0, 1, 50)
    assert np.abs(curve_eval(back, theta) - curve_eval(circle, theta)).max() == 0.0


def test_read_curve_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.txt"
    path.write_text("not a curve\n1 2 3\n")
    with pytest.raises(ValueError):
        read_curve_text(path)
