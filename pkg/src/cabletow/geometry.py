"""Planar geometric primitives for the anchored-box cable model.

Every function accepts floats, numpy arrays or :class:`~cabletow.ad.Dual`
components, so the optimizer can differentiate through the same code that the
plant and the tests evaluate numerically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import ad

MODES3 = ("d", "u", "l")
MODES2 = ("d", "r")


class Vec2:
    """2-vector whose components may be floats, arrays or duals."""

    __slots__ = ("x", "y")
    __array_ufunc__ = None

    def __init__(self, x, y):
        self.x = x
        self.y = y

    def __iter__(self):
        yield self.x
        yield self.y

    def __repr__(self):
        return f"Vec2({self.x!r}, {self.y!r})"

    def __add__(self, o):
        return Vec2(self.x + o.x, self.y + o.y)

    def __sub__(self, o):
        return Vec2(self.x - o.x, self.y - o.y)

    def __neg__(self):
        return Vec2(-self.x, -self.y)

    def __mul__(self, s):
        return Vec2(self.x * s, self.y * s)

    def __rmul__(self, s):
        return Vec2(s * self.x, s * self.y)

    def __truediv__(self, s):
        return Vec2(self.x / s, self.y / s)

    def dot(self, o):
        return self.x * o.x + self.y * o.y

    def cross(self, o):
        """Scalar planar cross product ``self.x*o.y - self.y*o.x``."""
        return self.x * o.y - self.y * o.x

    def to_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(ad.value(self.x), ad.value(self.y)), axis=-1)


PlanarVec = Vec2


class BoxPose(NamedTuple):
    p_b: Vec2
    theta: object


class State(NamedTuple):
    """Stacked box pose/velocity and gripper position/velocity (10 components)."""

    px: object
    py: object
    theta: object
    vx: object
    vy: object
    omega: object
    gx: object
    gy: object
    gvx: object
    gvy: object

    @property
    def p_b(self) -> Vec2:
        return Vec2(self.px, self.py)

    @property
    def v_b(self) -> Vec2:
        return Vec2(self.vx, self.vy)

    @property
    def x_g(self) -> Vec2:
        return Vec2(self.gx, self.gy)

    @property
    def v_g(self) -> Vec2:
        return Vec2(self.gvx, self.gvy)

    @property
    def pose(self) -> BoxPose:
        return BoxPose(self.p_b, self.theta)

    @classmethod
    def from_array(cls, a) -> "State":
        a = np.asarray(a, dtype=float)
        if a.shape[-1] != STATE_DIM:
            raise ValueError(f"expected last axis of size {STATE_DIM}, got {a.shape}")
        return cls(*(a[..., i] for i in range(STATE_DIM)))

    @classmethod
    def from_parts(cls, p_b, theta, v_b, omega, x_g, v_g) -> "State":
        return cls(p_b[0], p_b[1], theta, v_b[0], v_b[1], omega, x_g[0], x_g[1], v_g[0], v_g[1])

    def to_array(self) -> np.ndarray:
        return np.stack(np.broadcast_arrays(*(ad.value(c) for c in self)), axis=-1)


STATE_DIM = len(State._fields)


@dataclass(frozen=True)
class BodyGeometry:
    """Body-frame anchor and the two vertices adjacent to the anchored face."""

    p_a_body: tuple[float, float] = (0.25, 0.0)
    c_u_body: tuple[float, float] = (0.25, 0.25)
    c_l_body: tuple[float, float] = (0.25, -0.25)
    L0: float = 1.5

    def __post_init__(self):
        a, u, l = (np.asarray(v, dtype=float) for v in (self.p_a_body, self.c_u_body, self.c_l_body))
        if np.allclose(u, l):
            raise ValueError("c_u_body and c_l_body must differ")
        if not self.L0 > 0:
            raise ValueError("L0 must be positive")
        seg = u - l
        t = float(np.dot(a - l, seg) / np.dot(seg, seg))
        off = a - (l + t * seg)
        if not (-1e-9 <= t <= 1 + 1e-9) or np.hypot(*off) > 1e-9 * (1 + np.hypot(*seg)):
            raise ValueError("anchor must lie on the segment between the anchored-face vertices")

    @property
    def circumradius(self) -> float:
        """Distance from the CoM to the farthest face vertex."""
        return float(max(np.hypot(*self.c_u_body), np.hypot(*self.c_l_body)))

    @classmethod
    def square(cls, side: float = 0.5, L0: float = 1.5) -> "BodyGeometry":
        h = 0.5 * side
        return cls((h, 0.0), (h, h), (h, -h), L0)


@dataclass(frozen=True)
class SmoothingParams:
    eps_norm: float = 1e-6
    k_sel: float = 50.0
    k_gate: float = 20.0

    def __post_init__(self):
        if not (self.eps_norm > 0 and self.k_sel > 0 and self.k_gate > 0):
            raise ValueError("smoothing parameters must be positive")


def smooth_norm(r: Vec2, eps: float):
    return ad.sqrt(r.x * r.x + r.y * r.y + eps)


def smooth_unit(r: Vec2, eps: float) -> Vec2:
    return r / smooth_norm(r, eps)


def rotate(theta, v) -> Vec2:
    c, s = ad.cos(theta), ad.sin(theta)
    vx, vy = v
    return Vec2(c * vx - s * vy, s * vx + c * vy)


def face_frame(theta) -> tuple[Vec2, Vec2]:
    """Outward normal ``n_x`` and tangent ``n_y`` of the anchored face."""
    c, s = ad.cos(theta), ad.sin(theta)
    return Vec2(c, s), Vec2(-s, c)


class WorldPoints(NamedTuple):
    p_a: Vec2
    p_u: Vec2
    p_l: Vec2


def body_to_world(pose, c) -> Vec2:
    return pose.p_b + rotate(pose.theta, c)


def world_points(pose, geom: BodyGeometry) -> WorldPoints:
    """World positions of anchor and both face vertices for a pose (or state)."""
    return WorldPoints(
        body_to_world(pose, geom.p_a_body),
        body_to_world(pose, geom.c_u_body),
        body_to_world(pose, geom.c_l_body),
    )


def vertex_point(state, geom: BodyGeometry, vertex: str) -> Vec2:
    if vertex == "u":
        return body_to_world(state, geom.c_u_body)
    if vertex == "l":
        return body_to_world(state, geom.c_l_body)
    raise ValueError(f"unknown vertex {vertex!r}")


def effective_length_direct(state, geom: BodyGeometry, smoothing: SmoothingParams):
    p_a = body_to_world(state, geom.p_a_body)
    return smooth_norm(state.x_g - p_a, smoothing.eps_norm)


def _length_via(state, geom, p_v, eps):
    p_a = body_to_world(state, geom.p_a_body)
    return smooth_norm(p_v - p_a, eps) + smooth_norm(state.x_g - p_v, eps)


def effective_length_vertex(state, geom: BodyGeometry, vertex: str, smoothing: SmoothingParams):
    return _length_via(state, geom, vertex_point(state, geom, vertex), smoothing.eps_norm)


def selector_coordinate(state, geom: BodyGeometry, smoothing: SmoothingParams):
    """Tangential component of the anchor-to-gripper unit vector."""
    _, n_y = face_frame(state.theta)
    p_a = body_to_world(state, geom.p_a_body)
    return n_y.dot(smooth_unit(state.x_g - p_a, smoothing.eps_norm))


def selector_rho(state, geom: BodyGeometry, smoothing: SmoothingParams):
    """Vertex selector in [0, 1]; 1 picks the upper vertex, 0 the lower."""
    s = selector_coordinate(state, geom, smoothing)
    return 0.5 * (1.0 + ad.tanh(smoothing.k_sel * s))


def interpolated_vertex(state, geom: BodyGeometry, rho) -> Vec2:
    (ux, uy), (lx, ly) = geom.c_u_body, geom.c_l_body
    c = Vec2(rho * ux + (1.0 - rho) * lx, rho * uy + (1.0 - rho) * ly)
    return state.p_b + rotate(state.theta, c)


def redirection_point(state, geom: BodyGeometry, smoothing: SmoothingParams) -> Vec2:
    return interpolated_vertex(state, geom, selector_rho(state, geom, smoothing))


def effective_length_redirected(state, geom: BodyGeometry, smoothing: SmoothingParams):
    return _length_via(state, geom, redirection_point(state, geom, smoothing), smoothing.eps_norm)


def gate_coordinate(state, geom: BodyGeometry, smoothing: SmoothingParams):
    """``n_x . unit(x_g - p_a)``: positive when the gripper is outward of the face."""
    n_x, _ = face_frame(state.theta)
    p_a = body_to_world(state, geom.p_a_body)
    return n_x.dot(smooth_unit(state.x_g - p_a, smoothing.eps_norm))


def gate_sigma(state, geom: BodyGeometry, smoothing: SmoothingParams):
    """Direct-mode weight of the implicit routing gate."""
    s = gate_coordinate(state, geom, smoothing)
    return 0.5 * (1.0 + ad.tanh(smoothing.k_gate * s))


def feasibility_residuals(state, geom: BodyGeometry, smoothing: SmoothingParams) -> dict[str, list]:
    """Per-mode wedge residuals; a mode is feasible when all its entries are <= 0."""
    eps = smoothing.eps_norm
    n_x, n_y = face_frame(state.theta)
    pts = world_points(state, geom)
    e_ag = smooth_unit(state.x_g - pts.p_a, eps)
    e_ug = smooth_unit(state.x_g - pts.p_u, eps)
    e_lg = smooth_unit(state.x_g - pts.p_l, eps)
    return {
        "d": [-n_x.dot(e_ag)],
        "u": [n_x.dot(e_ug), -n_y.dot(e_ug)],
        "l": [n_x.dot(e_lg), n_y.dot(e_lg)],
    }


def redirected_wedge(state, geom: BodyGeometry, smoothing: SmoothingParams):
    """Normal and tangential projections of ``unit(x_g - p_rho)``.

    The tangential axis is ``(2*rho - 1) * n_y`` so it flips smoothly with the
    selected vertex: ``+n_y`` at the upper vertex, ``-n_y`` at the lower one.
    """
    eps = smoothing.eps_norm
    n_x, n_y = face_frame(state.theta)
    rho = selector_rho(state, geom, smoothing)
    e = smooth_unit(state.x_g - interpolated_vertex(state, geom, rho), eps)
    return n_x.dot(e), (2.0 * rho - 1.0) * n_y.dot(e)
