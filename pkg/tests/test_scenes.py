import json

import numpy as np
import pytest

from cabletow.geometry import BodyGeometry, State, effective_length_direct, SmoothingParams
from cabletow.scenes import DEFAULT_POLICIES, SceneConfig, load_builtin, make_scene


@pytest.mark.parametrize("name", ["zigzag", "arc", "obstacle"])
def test_full_scale_horizon_and_length(name):
    sc = make_scene(name)
    assert sc.N == 600 and sc.dt == 0.06
    assert sc.path_length() == pytest.approx(6.0, rel=1e-3)
    assert sc.reference.shape == (601, 3) and np.all(np.isfinite(sc.reference))


def test_zigzag_turns():
    sc = make_scene("zigzag")
    h = sc.reference[1:-1, 2]
    assert set(np.round(np.rad2deg(np.unique(np.round(h, 12))), 9)) == {22.5, -22.5}
    assert sc.meta["turns_deg"] == [-45.0, 45.0]


def test_arc_constant_curvature():
    sc = make_scene("arc")
    xy = sc.reference[:, :2]
    r = sc.meta["radius"]
    center = np.array([0.0, r])
    np.testing.assert_allclose(np.hypot(*(xy - center).T), r, rtol=1e-12)
    # heading follows the tangent
    d = np.diff(xy, axis=0)
    mid = 0.5 * (sc.reference[1:, 2] + sc.reference[:-1, 2])
    np.testing.assert_allclose(np.arctan2(d[1:-1, 1], d[1:-1, 0]), mid[1:-1], atol=1e-9)


def test_obstacle_offset_from_line():
    sc = make_scene("obstacle")
    (ob,) = sc.obstacles
    assert ob["center"][1] > ob["radius"]
    assert np.all(sc.reference[:, 1] == 0.0)


def test_deterministic_and_seed_recorded():
    a, b = make_scene("arc", 0.5, seed=3), make_scene("arc", 0.5, seed=3)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict()) and a.meta["seed"] == 3


def test_scale_shrinks_horizon_and_path():
    sc = make_scene("zigzag", 1 / 3)
    assert sc.N == 200 and sc.path_length() == pytest.approx(2.0, rel=1e-3)


def test_reference_starts_and_ends_at_rest():
    sc = make_scene("zigzag", 0.5)
    step = np.hypot(*np.diff(sc.reference[:, :2], axis=0).T)
    assert step[0] < 1e-3 * step.max() and step[-1] < 1e-3 * step.max()


def test_initial_cable_slightly_slack():
    g = BodyGeometry.square()
    for name in ("zigzag", "arc", "obstacle"):
        z = State.from_array(make_scene(name).initial_state)
        d = float(effective_length_direct(z, g, SmoothingParams(eps_norm=1e-12)))
        assert d == pytest.approx(g.L0 - 0.02, abs=1e-9)


def test_policies():
    assert make_scene("arc").policy == DEFAULT_POLICIES["arc"]
    assert DEFAULT_POLICIES["arc"]["wrap_min"] == 0.05
    assert DEFAULT_POLICIES["obstacle"]["rmse_max"] == 0.10


@pytest.mark.parametrize("args", [("spiral",), ("arc", 0.0)])
def test_bad_arguments(args):
    with pytest.raises(ValueError):
        make_scene(*args)


def test_unknown_shape_key():
    with pytest.raises(ValueError):
        make_scene("arc", turn_deg=30.0)


def test_file_roundtrip(tmp_path):
    sc = make_scene("obstacle", 0.1)
    sc.save(tmp_path / "s.json")
    back = SceneConfig.load(tmp_path / "s.json")
    assert json.dumps(back.to_dict()) == json.dumps(sc.to_dict())


@pytest.mark.parametrize("patch", [{"schema": "x/9"}, {"extra": 1}, {"initial_state": [0.0] * 9},
                                   {"obstacles": [{"center": [0, 0], "radius": -1}]}])
def test_file_rejects_malformed(patch):
    d = make_scene("obstacle", 0.05).to_dict()
    d.update(patch)
    with pytest.raises(ValueError):
        SceneConfig.from_dict(d)


@pytest.mark.parametrize("name", ["zigzag", "arc", "obstacle"])
def test_builtin_scenes(name):
    sc = load_builtin(name)
    assert sc.name == name and sc.N == 600
