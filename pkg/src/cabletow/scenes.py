"""Scene definitions: box-pose reference, initial state, obstacles, success policy."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import BodyGeometry

SCENE_SCHEMA = "cabletow.scene/1"
FULL_N = 600
FULL_PATH = 6.0

DEFAULT_POLICIES = {
    "zigzag": {"rmse_max": 0.08, "final_err_max": 0.10, "wrap_min": None, "require_converged": True},
    "arc": {"rmse_max": 0.08, "final_err_max": 0.10, "wrap_min": 0.05, "require_converged": False},
    "obstacle": {"rmse_max": 0.10, "final_err_max": 0.12, "wrap_min": None, "require_converged": False},
}


@dataclass
class SceneConfig:
    name: str
    dt: float
    reference: np.ndarray  # (N+1, 3) box pose (x, y, theta)
    initial_state: np.ndarray  # (10,)
    obstacles: list[dict] = field(default_factory=list)
    policy: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.reference.shape[0] - 1

    def path_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.reference[:, :2], axis=0).T)))

    def to_dict(self) -> dict:
        return {
            "schema": SCENE_SCHEMA,
            "name": self.name,
            "dt": self.dt,
            "N": self.N,
            "reference": {
                "x": self.reference[:, 0].tolist(),
                "y": self.reference[:, 1].tolist(),
                "theta": self.reference[:, 2].tolist(),
            },
            "initial_state": self.initial_state.tolist(),
            "obstacles": self.obstacles,
            "policy": self.policy,
            "overrides": self.overrides,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        if d.get("schema") != SCENE_SCHEMA:
            raise ValueError(f"unsupported scene schema {d.get('schema')!r}; expected {SCENE_SCHEMA!r}")
        unknown = set(d) - {"schema", "name", "dt", "N", "reference", "initial_state", "obstacles", "policy",
                            "overrides", "meta"}
        if unknown:
            raise ValueError(f"unknown scene keys {sorted(unknown)}")
        ref = np.stack([np.asarray(d["reference"][k], dtype=float) for k in ("x", "y", "theta")], axis=1)
        if "N" in d and ref.shape[0] != int(d["N"]) + 1:
            raise ValueError(f"reference has {ref.shape[0]} samples, expected N+1={int(d['N']) + 1}")
        z0 = np.asarray(d["initial_state"], dtype=float)
        if z0.shape != (10,):
            raise ValueError("initial_state must have 10 entries")
        for ob in d.get("obstacles", []):
            if set(ob) != {"center", "radius"} or len(ob["center"]) != 2 or not ob["radius"] > 0:
                raise ValueError(f"malformed obstacle {ob!r}")
        return cls(
            name=d["name"],
            dt=float(d["dt"]),
            reference=ref,
            initial_state=z0,
            obstacles=list(d.get("obstacles", [])),
            policy=dict(d.get("policy", {})),
            overrides=dict(d.get("overrides", {})),
            meta=dict(d.get("meta", {})),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SceneConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _time_law(N: int) -> np.ndarray:
    # cycloidal arclength fraction: zero speed at both ends
    tau = np.linspace(0.0, 1.0, N + 1)
    return tau - np.sin(2 * np.pi * tau) / (2 * np.pi)


def _resample_polyline(points: np.ndarray, s_frac: np.ndarray):
    seg = np.diff(points, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    s = s_frac * cum[-1]
    i = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seglen) - 1)
    t = (s - cum[i]) / seglen[i]
    xy = points[i] + t[:, None] * seg[i]
    heading = np.arctan2(seg[i, 1], seg[i, 0])
    return xy, heading


def _initial_state(x, y, theta, geom: BodyGeometry, slack: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    ax, ay = geom.p_a_body
    pa = np.array([x + c * ax - s * ay, y + s * ax + c * ay])
    g = pa + (geom.L0 - slack) * np.array([c, s])
    return np.array([x, y, theta, 0.0, 0.0, 0.0, g[0], g[1], 0.0, 0.0])


SHAPE_DEFAULTS = {
    "zigzag": {"turn_deg": 45.0},
    "arc": {"sweep_deg": 90.0},
    "obstacle": {"offset": 0.35, "radius": 0.15},
}

# configuration overrides carried by each scene (same sections as the CLI --set)
DEFAULT_OVERRIDES: dict[str, dict] = {"zigzag": {}, "arc": {}, "obstacle": {}}


def make_scene(name: str, scale: float = 1.0, seed: int = 0, dt: float = 0.06,
               geom: BodyGeometry | None = None, **shape) -> SceneConfig:
    """Deterministic scene generator.

    ``scale`` shrinks horizon and path together: ``N = round(600 * scale)`` and
    the path length is ``6 m * scale``.  ``seed`` is recorded but the scenes
    themselves contain no randomness.  ``shape`` overrides the per-scene
    geometry in ``SHAPE_DEFAULTS``.
    """
    if name not in SHAPE_DEFAULTS:
        raise ValueError(f"unknown scene {name!r}; expected zigzag, arc or obstacle")
    unknown = set(shape) - set(SHAPE_DEFAULTS[name])
    if unknown:
        raise ValueError(f"unknown shape keys for {name!r}: {sorted(unknown)}")
    shp = {**SHAPE_DEFAULTS[name], **shape}
    if scale <= 0:
        raise ValueError("scale must be positive")
    geom = geom or BodyGeometry.square()
    N = max(2, int(round(FULL_N * scale)))
    length = FULL_PATH * scale
    frac = _time_law(N)
    obstacles: list[dict] = []
    if name == "zigzag":
        # three legs at +a/2, -a/2, +a/2: two alternating turns of a
        half = 0.5 * shp["turn_deg"]
        headings = np.deg2rad([half, -half, half])
        leg = length / 3
        pts = [np.zeros(2)]
        for h in headings:
            pts.append(pts[-1] + leg * np.array([np.cos(h), np.sin(h)]))
        xy, heading = _resample_polyline(np.array(pts), frac)
        meta = {"leg_length": leg, "turns_deg": [-shp["turn_deg"], shp["turn_deg"]]}
    elif name == "arc":
        sweep = np.deg2rad(shp["sweep_deg"])
        radius = length / sweep
        phi = frac * sweep
        xy = np.stack([radius * np.sin(phi), radius * (1 - np.cos(phi))], axis=1)
        heading = phi
        meta = {"radius": radius, "sweep_deg": shp["sweep_deg"]}
    elif name == "obstacle":
        xy = np.stack([frac * length, np.zeros(N + 1)], axis=1)
        heading = np.zeros(N + 1)
        obstacles = [{"center": [0.5 * length, shp["offset"]], "radius": shp["radius"]}]
        meta = {"length": length}
    ref = np.column_stack([xy, heading])
    z0 = _initial_state(ref[0, 0], ref[0, 1], ref[0, 2], geom, slack=0.02)
    meta.update({"scale": scale, "seed": seed, "path_length": float(length), "shape": shp})
    return SceneConfig(
        name=name,
        dt=dt,
        reference=ref,
        initial_state=z0,
        obstacles=obstacles,
        policy=dict(DEFAULT_POLICIES[name]),
        overrides=json.loads(json.dumps(DEFAULT_OVERRIDES[name])),
        meta=meta,
    )


def load_builtin(name: str) -> SceneConfig:
    """Scene shipped with the package (full scale)."""
    path = resources.files("cabletow") / "scene_data" / f"{name}.json"
    return SceneConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))
