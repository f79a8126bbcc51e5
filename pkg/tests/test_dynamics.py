import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cabletow import ad
from cabletow.dynamics import PhysicalParams, external_wrench, step
from cabletow.geometry import BodyGeometry, SmoothingParams, State, Vec2
from cabletow.transmission import ModeWeights

from conftest import make_state, random_states, states

DIRECT = ModeWeights.one_hot("d")


def test_defaults():
    p = PhysicalParams()
    assert (p.box_mass, p.box_inertia, p.grip_mass, p.grip_damping, p.mu, p.dt, p.T_max) == (
        5.0, 0.21, 1.0, 2.0, 0.3, 0.06, 50.0)
    assert p.r_fric == pytest.approx(0.4 * 0.25)
    assert p.friction_stability_margin() < 2.0


@pytest.mark.parametrize("kw", [{"box_mass": 0.0}, {"mu": -0.1}, {"dt": 0.0}, {"eps_fric": 0.0}])
def test_rejects_bad_params(kw):
    with pytest.raises(ValueError):
        PhysicalParams(**kw)


def test_scaled_joint_and_override():
    p = PhysicalParams().scaled(1.15, mu=1.0)
    assert p.box_mass == pytest.approx(5.75) and p.rot_damping == pytest.approx(0.575)
    assert p.mu == 0.3 and p.dt == 0.06
    with pytest.raises(ValueError):
        PhysicalParams().scaled(1.1, dt=2.0)


def test_external_wrench_at_rest():
    w = external_wrench(Vec2(0.0, 0.0), 0.0, PhysicalParams())
    assert (w.F.x, w.F.y, w.tau) == (0.0, 0.0, 0.0)


def test_external_wrench_viscous():
    w = external_wrench(Vec2(1.0, 0.0), 0.0, PhysicalParams(mu=0.0, lin_damping=2.0))
    assert (w.F.x, w.F.y) == (2.0, 0.0)


def test_external_wrench_saturated_coulomb():
    p = PhysicalParams(lin_damping=0.0)
    w = external_wrench(Vec2(10.0, 0.0), 0.0, p)
    n_load = 9.81 * 5.0
    # smooth_unit error is eps/(2|v|^2) relative
    assert w.F.x == pytest.approx(0.3 * n_load, rel=p.eps_fric / 100)
    assert w.F.y == 0.0


def test_external_wrench_opposes_rotation():
    p = PhysicalParams()
    assert external_wrench(Vec2(0.0, 0.0), 2.0, p).tau > 0
    assert external_wrench(Vec2(0.0, 0.0), -2.0, p).tau < 0


def test_rest_is_equilibrium(geom):
    z = make_state(grip=(1.0, 0.0))
    z1 = step(z, (0.0, 0.0), 0.0, DIRECT, geom, PhysicalParams(), SmoothingParams())
    assert np.array_equal(z1.to_array(), z.to_array())


def test_drift(geom):
    p = PhysicalParams(mu=0.0, lin_damping=0.0)
    z = make_state(v=(1.0, 0.0), grip=(1.0, 0.0))
    z1 = step(z, (0.0, 0.0), 0.0, DIRECT, geom, p, SmoothingParams())
    assert z1.px == pytest.approx(0.06, abs=1e-15) and z1.vx == 1.0


def test_one_step_direct_pull(wide_geom):
    p = PhysicalParams()
    z = make_state(grip=(2.0, 0.0))
    z1 = step(z, (0.0, 0.0), 10.0, DIRECT, wide_geom, p, SmoothingParams(eps_norm=1e-12))
    # friction and damping vanish at rest, so only the cable acts
    assert z1.vx == pytest.approx(0.06 * 10.0 / 5.0, rel=1e-10)
    assert z1.px == pytest.approx(0.06 * z1.vx, rel=1e-12)
    assert z1.gvx == pytest.approx(-0.06 * 10.0, rel=1e-10)


@given(states(), st.floats(0, 50), st.floats(-20, 20), st.floats(-20, 20),
       st.sampled_from(["d", "u", "l", "r"]))
def test_momentum_bookkeeping(z, T, ux, uy, mode):
    g = BodyGeometry.square()
    p = PhysicalParams(mu=0.0, lin_damping=0.0, rot_damping=0.0, grip_damping=0.0)
    z1 = step(z, (ux, uy), T, ModeWeights.one_hot(mode, modes=("d", mode) if mode != "d" else ("d",)),
              g, p, SmoothingParams())
    for a, da, u in (("vx", "gvx", ux), ("vy", "gvy", uy)):
        mom = p.box_mass * (getattr(z1, a) - getattr(z, a)) + p.grip_mass * (getattr(z1, da) - getattr(z, da))
        assert mom == pytest.approx(p.dt * u, abs=1e-10 * (1 + T + abs(u)))


def _gripper_exact(v0, x0, u, b, m, t):
    vinf = u / b
    a = b / m
    v = vinf + (v0 - vinf) * math.exp(-a * t)
    x = x0 + vinf * t + (v0 - vinf) * (1 - math.exp(-a * t)) / a
    return x, v


def test_semi_implicit_local_order(geom):
    errs = []
    for dt in (0.04, 0.02, 0.01):
        p = PhysicalParams(dt=dt)
        z = make_state(grip=(1.0, 0.0), vg=(0.7, 0.0))
        z1 = step(z, (3.0, 0.0), 0.0, DIRECT, geom, p, SmoothingParams())
        x, v = _gripper_exact(0.7, 1.0, 3.0, p.grip_damping, p.grip_mass, dt)
        errs.append(abs(z1.gx - x) + abs(z1.gvx - v))
    for e0, e1 in zip(errs, errs[1:]):
        assert 3.5 <= e0 / e1 <= 4.5


def test_kinetic_energy_non_increasing(geom):
    p = PhysicalParams()
    rng = np.random.default_rng(3)
    for z in random_states(rng, 20, spread=2.0):
        ke = []
        for _ in range(60):
            ke.append(0.5 * p.box_mass * (z.vx**2 + z.vy**2) + 0.5 * p.box_inertia * z.omega**2
                      + 0.5 * p.grip_mass * (z.gvx**2 + z.gvy**2))
            z = step(z, (0.0, 0.0), 0.0, DIRECT, geom, p, SmoothingParams())
        assert np.all(np.diff(ke) <= 1e-12)


def test_step_jacobian_matches_fd(geom):
    p = PhysicalParams()
    sm = SmoothingParams()
    rng = np.random.default_rng(9)

    def f(x):
        z = State(*x[:10])
        out = step(z, (x[10], x[11]), x[12], {"d": x[13], "r": 1.0 - x[13]}, geom, p, sm)
        return list(out)

    worst = 0.0
    for z in random_states(rng, 50, spread=1.5):
        x = np.concatenate([z.to_array(), rng.uniform(-5, 5, 2), [rng.uniform(1, 40)], [rng.uniform(0.1, 0.9)]])
        _, J = ad.jacobian(f, x)
        fd = np.zeros_like(J)
        for j in range(x.size):
            h = 1e-6 * max(1.0, abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += h
            xm[j] -= h
            fd[:, j] = (np.array(f(xp), float) - np.array(f(xm), float)) / (2 * h)
        worst = max(worst, np.max(np.abs(J - fd)) / max(1.0, np.max(np.abs(J))))
    assert worst <= 1e-5
