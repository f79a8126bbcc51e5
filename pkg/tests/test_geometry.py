import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cabletow import ad
from cabletow.geometry import (
    BodyGeometry,
    BoxPose,
    SmoothingParams,
    State,
    Vec2,
    effective_length_direct,
    effective_length_vertex,
    feasibility_residuals,
    gate_coordinate,
    gate_sigma,
    interpolated_vertex,
    selector_coordinate,
    selector_rho,
    smooth_norm,
    smooth_unit,
    world_points,
)

from conftest import finite, make_state, random_states, states


# ---- smoothed norm and unit vector -----------------------------------------


def test_smooth_norm_at_origin():
    assert smooth_norm(Vec2(0.0, 0.0), 1e-6) == pytest.approx(1e-3, rel=1e-12)


def test_smooth_norm_closed_form():
    assert smooth_norm(Vec2(3.0, 4.0), 1e-6) == math.sqrt(25.000001)
    assert smooth_norm(Vec2(3.0, 4.0), 1e-300) == pytest.approx(5.0, rel=1e-15)


def test_smooth_norm_gradient_vanishes_at_origin():
    x, y = ad.Dual.seed(np.zeros((1, 2)))
    n = smooth_norm(Vec2(x, y), 1e-6)
    np.testing.assert_array_equal(n.der, 0.0)


def test_smooth_unit_of_zero_is_zero():
    u = smooth_unit(Vec2(0.0, 0.0), 1e-6)
    assert (u.x, u.y) == (0.0, 0.0)


def test_smooth_unit_limit():
    u = smooth_unit(Vec2(1.0, 0.0), 1e-8)
    assert abs(u.x - 1.0) <= 1e-8 and u.y == 0.0


@given(finite, finite, st.floats(min_value=1e-9, max_value=1.0))
def test_smooth_norm_square_identity(x, y, eps):
    n = smooth_norm(Vec2(x, y), eps)
    assert n * n - (x * x + y * y) == pytest.approx(eps, rel=1e-6, abs=1e-12 * (1 + x * x + y * y))


@given(finite, finite, st.floats(min_value=1e-9, max_value=1.0))
def test_smooth_unit_strictly_inside_unit_disk(x, y, eps):
    u = smooth_unit(Vec2(x, y), eps)
    # |u|^2 = r.r / (r.r + eps) < 1 exactly
    assert (x * x + y * y) / (x * x + y * y + eps) < 1.0
    assert math.hypot(u.x, u.y) <= 1.0


def test_smooth_unit_approaches_one_far_away():
    for r in (1e-2, 1.0, 1e2):
        u = smooth_unit(Vec2(r, 0.0), 1e-6)
        assert 1.0 - u.x <= 1e-6 / r**2


# ---- world points -----------------------------------------------------------


def test_world_points_identity(wide_geom):
    pts = world_points(BoxPose(Vec2(0.0, 0.0), 0.0), wide_geom)
    assert pts.p_a.to_array().tolist() == [0.5, 0.0]


def test_world_points_quarter_turn(wide_geom):
    pts = world_points(BoxPose(Vec2(0.0, 0.0), math.pi / 2), wide_geom)
    np.testing.assert_allclose(pts.p_a.to_array(), [0.0, 0.5], atol=1e-15)


def test_world_points_translation(wide_geom):
    pts = world_points(BoxPose(Vec2(1.0, 2.0), 0.0), wide_geom)
    assert pts.p_u.to_array().tolist() == [1.5, 2.5]


@given(finite, finite, st.floats(-math.pi, math.pi), finite, finite, st.floats(-math.pi, math.pi))
def test_world_points_commute_with_rigid_motion(px, py, th, tx, ty, phi):
    g = BodyGeometry.square()
    base = world_points(BoxPose(Vec2(px, py), th), g)
    c, s = math.cos(phi), math.sin(phi)
    moved_pose = BoxPose(Vec2(c * px - s * py + tx, s * px + c * py + ty), th + phi)
    moved = world_points(moved_pose, g)
    for a, b in zip(base, moved):
        expect = np.array([c * a.x - s * a.y + tx, s * a.x + c * a.y + ty])
        np.testing.assert_allclose(b.to_array(), expect, atol=1e-12)


def test_geometry_rejects_bad_layout():
    with pytest.raises(ValueError):
        BodyGeometry((0.25, 0.0), (0.25, 0.25), (0.25, 0.25))
    with pytest.raises(ValueError):
        BodyGeometry((0.0, 0.0), (0.25, 0.25), (0.25, -0.25))
    with pytest.raises(ValueError):
        BodyGeometry(L0=0.0)
    with pytest.raises(ValueError):
        SmoothingParams(k_gate=0.0)


# ---- effective lengths --------------------------------------------------------


def test_direct_length_collinear(wide_geom, sharp):
    assert effective_length_direct(make_state(grip=(2.0, 0.0)), wide_geom, sharp) == pytest.approx(1.5, abs=1e-8)


def test_direct_length_coincident(wide_geom):
    sm = SmoothingParams(eps_norm=1e-6)
    assert effective_length_direct(make_state(grip=(0.5, 0.0)), wide_geom, sm) == pytest.approx(1e-3, rel=1e-12)


def test_direct_length_rotated(wide_geom, sharp):
    # anchor at (0, 0.5) after the quarter turn, gripper 1.5 above it
    z = make_state(theta=math.pi / 2, grip=(0.0, 2.0))
    assert effective_length_direct(z, wide_geom, sharp) == pytest.approx(1.5, abs=1e-8)


def test_vertex_length_collinear(wide_geom, sharp):
    z = make_state(grip=(0.5, 1.5))
    assert effective_length_vertex(z, wide_geom, "u", sharp) == pytest.approx(1.5, abs=1e-7)


def test_vertex_length_at_vertex(wide_geom):
    sm = SmoothingParams(eps_norm=1e-6)
    z = make_state(grip=(0.5, 0.5))
    assert effective_length_vertex(z, wide_geom, "u", sm) == pytest.approx(math.sqrt(0.25 + 1e-6) + 1e-3, rel=1e-12)


@given(states())
def test_vertex_length_triangle_inequality(z):
    g = BodyGeometry.square()
    sm = SmoothingParams()
    dd = effective_length_direct(z, g, sm)
    for v in ("u", "l"):
        assert effective_length_vertex(z, g, v, sm) >= dd - 2 * math.sqrt(sm.eps_norm)


# ---- selector, interpolated vertex, gate --------------------------------------


def test_selector_half_on_the_normal(wide_geom):
    assert selector_rho(make_state(grip=(2.0, 0.0)), wide_geom, SmoothingParams()) == 0.5


def test_selector_closed_form(wide_geom):
    sm = SmoothingParams(k_sel=10.0, eps_norm=1e-12)
    # unit(x_g - p_a) has tangential component 0.5 at 30 degrees
    th = math.radians(30)
    z = make_state(grip=(0.5 + math.cos(th), math.sin(th)))
    assert selector_coordinate(z, wide_geom, sm) == pytest.approx(0.5, abs=1e-10)
    assert selector_rho(z, wide_geom, sm) == pytest.approx(0.5 * (1 + math.tanh(5.0)), abs=1e-9)
    # tanh(5) itself is 0.99991; the selector is its affine image
    assert selector_rho(z, wide_geom, sm) == pytest.approx(0.999955, abs=1e-6)


@given(states())
def test_selector_antisymmetry(z):
    g = BodyGeometry.square()
    sm = SmoothingParams()
    # mirror the gripper across the face normal line through the anchor
    n_x = np.array([math.cos(z.theta), math.sin(z.theta)])
    pa = world_points(z, g).p_a.to_array()
    r = np.array([z.gx, z.gy]) - pa
    m = pa + 2 * np.dot(r, n_x) * n_x - r
    zm = z._replace(gx=m[0], gy=m[1])
    assert selector_rho(zm, g, sm) == pytest.approx(1.0 - selector_rho(z, g, sm), abs=1e-9)


def test_interpolated_vertex_endpoints(wide_geom):
    z = make_state(box=(0.3, -0.2), theta=0.7)
    pts = world_points(z, wide_geom)
    np.testing.assert_allclose(interpolated_vertex(z, wide_geom, 1.0).to_array(), pts.p_u.to_array(), atol=1e-15)
    np.testing.assert_allclose(interpolated_vertex(z, wide_geom, 0.0).to_array(), pts.p_l.to_array(), atol=1e-15)


def test_interpolated_vertex_midpoint(wide_geom):
    assert interpolated_vertex(make_state(), wide_geom, 0.5).to_array().tolist() == [0.5, 0.0]


def test_gate_saturates_outward(wide_geom):
    sm = SmoothingParams(k_gate=10.0)
    z = make_state(grip=(2.0, 0.0))
    assert gate_sigma(z, wide_geom, sm) == pytest.approx(0.99999, abs=1e-5)


def test_gate_half_in_face_plane(wide_geom):
    z = make_state(grip=(0.5, 1.0))
    assert gate_coordinate(z, wide_geom, SmoothingParams()) == 0.0
    assert gate_sigma(z, wide_geom, SmoothingParams()) == 0.5


def test_gate_closed_form(wide_geom):
    sm = SmoothingParams(k_gate=10.0, eps_norm=1e-14)
    z = make_state(grip=(0.5 + 0.3, math.sqrt(1 - 0.09)))
    assert gate_sigma(z, wide_geom, sm) == pytest.approx(0.5 * (1 + math.tanh(3.0)), abs=1e-9)
    assert gate_sigma(z, wide_geom, sm) == pytest.approx(0.99752, abs=1e-5)


def _fd(fun, z, h=1e-6):
    a = z.to_array()
    out = np.zeros(10)
    for j in range(10):
        ap, am = a.copy(), a.copy()
        ap[j] += h
        am[j] -= h
        out[j] = (fun(State.from_array(ap)) - fun(State.from_array(am))) / (2 * h)
    return out


@pytest.mark.parametrize("fname", ["rho", "sigma"])
def test_selector_and_gate_are_smooth(fname):
    g = BodyGeometry.square()
    sm = SmoothingParams()
    f = selector_rho if fname == "rho" else gate_sigma
    rng = np.random.default_rng(4)
    worst = 0.0
    for z in random_states(rng, 100):
        _, jac = ad.jacobian(lambda c: [f(State(*c), g, sm)], z.to_array())
        der = jac[0]
        fd = _fd(lambda s: f(s, g, sm), z)
        scale = max(1e-3, np.max(np.abs(der)))
        worst = max(worst, np.max(np.abs(der - fd)) / scale)
    assert worst <= 1e-6


@given(states(), st.floats(min_value=0.2, max_value=1.0), st.sampled_from([1.0, -1.0]))
def test_selector_saturation(z, mag, sign):
    g = BodyGeometry.square()
    sm = SmoothingParams(k_sel=50.0, eps_norm=1e-12)
    n_x = np.array([math.cos(z.theta), math.sin(z.theta)])
    n_y = np.array([-math.sin(z.theta), math.cos(z.theta)])
    pa = world_points(z, g).p_a.to_array()
    s = sign * mag
    grip = pa + 2.0 * (s * n_y + math.sqrt(max(0.0, 1 - s * s)) * n_x)
    rho = selector_rho(z._replace(gx=grip[0], gy=grip[1]), g, sm)
    assert abs(rho - round(rho)) <= 1e-4


# ---- feasibility residuals ----------------------------------------------------


def test_direct_feasible_outward(wide_geom):
    res = feasibility_residuals(make_state(grip=(2.0, 0.3)), wide_geom, SmoothingParams())
    assert res["d"][0] <= 0


def test_upper_wrap_feasible_behind_and_above(wide_geom):
    # behind the face plane (x < 0.5) and above the upper vertex (y > 0.5)
    z = make_state(grip=(0.2, 1.4))
    res = feasibility_residuals(z, wide_geom, SmoothingParams())
    e = np.array([0.2 - 0.5, 1.4 - 0.5])
    e /= np.linalg.norm(e)
    assert res["u"][0] == pytest.approx(e[0], abs=1e-6) and res["u"][1] == pytest.approx(-e[1], abs=1e-6)
    assert max(res["u"]) <= 0
    assert res["d"][0] > 0
    assert res["l"][1] > 0


def test_direct_residual_zero_on_face_plane(wide_geom):
    res = feasibility_residuals(make_state(grip=(0.5, -0.9)), wide_geom, SmoothingParams())
    assert res["d"][0] == 0.0
