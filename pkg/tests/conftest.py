import numpy as np
import pytest
from hypothesis import settings, strategies as st

from cabletow.geometry import BodyGeometry, SmoothingParams, State

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False, allow_infinity=False)
angles = st.floats(min_value=-2 * np.pi, max_value=2 * np.pi, allow_nan=False)


@st.composite
def states(draw):
    px, py, vx, vy, gx, gy, gvx, gvy = (draw(finite) for _ in range(8))
    return State(px, py, draw(angles), vx, vy, draw(finite), gx, gy, gvx, gvy)


def make_state(box=(0.0, 0.0), theta=0.0, grip=(2.0, 0.0), v=(0.0, 0.0), omega=0.0, vg=(0.0, 0.0)):
    return State(box[0], box[1], theta, v[0], v[1], omega, grip[0], grip[1], vg[0], vg[1])


def random_states(rng, n, spread=3.0):
    out = []
    for _ in range(n):
        z = rng.uniform(-spread, spread, size=10)
        z[2] = rng.uniform(-np.pi, np.pi)
        out.append(State.from_array(z))
    return out


@pytest.fixture
def geom():
    return BodyGeometry.square()


@pytest.fixture
def wide_geom():
    # unit-half-side box used by the hand-worked examples
    return BodyGeometry((0.5, 0.0), (0.5, 0.5), (0.5, -0.5), 1.5)


@pytest.fixture
def sharp():
    return SmoothingParams(eps_norm=1e-8)


def wedge_states(rng, n, vertex="u", geom=None, margin=0.15):
    """States with the gripper strictly inside a vertex wrap wedge."""
    geom = geom or BodyGeometry.square()
    c = np.asarray(geom.c_u_body if vertex == "u" else geom.c_l_body)
    sign = 1.0 if vertex == "u" else -1.0
    out = []
    for _ in range(n):
        th = rng.uniform(-np.pi, np.pi)
        p = rng.uniform(-2, 2, size=2)
        # body-frame direction inside the wedge: behind the face, beyond the vertex
        a = rng.uniform(0.5 * np.pi + margin, np.pi - margin)
        r = rng.uniform(0.1, 1.5)
        gb = c + r * np.array([np.cos(a), sign * np.sin(a)])
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        g = p + R @ gb
        v = rng.uniform(-1, 1, size=5)
        out.append(State(p[0], p[1], th, v[0], v[1], v[2], g[0], g[1], v[3], v[4]))
    return out


# ---- acceptance report ------------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
