"""Mismatched open-loop numeric plant.

Strict routing classification, a unilateral spring-damper cable and PD
tracking of the planned gripper trajectory.  The cable is stiff, so each plan
interval is integrated with ``substeps`` semi-implicit sub-steps.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import PhysicalParams, external_wrench
from .geometry import (
    BodyGeometry,
    SmoothingParams,
    State,
    effective_length_direct,
    effective_length_vertex,
    feasibility_residuals,
)
from .transmission import unit_torque_gap, wrench_direct, wrench_vertex

LABELS = ("direct", "wrap-u", "wrap-l")
_MODE_OF = {"direct": "d", "wrap-u": "u", "wrap-l": "l"}
ROLLOUT_SCHEMA = "cabletow.rollout/1"


@dataclass(frozen=True)
class PlantConfig:
    k_c: float = 2000.0
    b_c: float = 20.0
    pd_kp: float = 200.0
    pd_kd: float = 30.0
    param_scale: float = 1.0
    classifier_hysteresis: float = 0.02
    substeps: int = 20
    scale_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.k_c > 0:
            raise ValueError("k_c must be positive")
        if min(self.b_c, self.pd_kp, self.pd_kd, self.classifier_hysteresis) < 0:
            raise ValueError("damping, gains and deadband must be nonnegative")
        if not self.param_scale > 0 or any(not v > 0 for v in self.scale_overrides.values()):
            raise ValueError("scales must be positive")
        if int(self.substeps) < 1:
            raise ValueError("substeps must be >= 1")

    def scaled_params(self, params: PhysicalParams) -> PhysicalParams:
        if self.param_scale == 1.0 and not self.scale_overrides:
            return params
        return params.scaled(self.param_scale, **self.scale_overrides)


def _worst(res) -> float:
    return max(float(r) for r in res)


def classify_mode(state: State, geom: BodyGeometry, previous: str | None = None,
                  hysteresis: float = 0.0, smoothing: SmoothingParams | None = None) -> str:
    """Hard wedge classification into ``direct``, ``wrap-u`` or ``wrap-l``.

    The previous label is kept while its residuals stay within the deadband.
    Otherwise the first strictly feasible mode wins, checked in the order
    direct, wrap-u, wrap-l; if none is feasible the least violated mode is
    taken, again preferring direct on ties.
    """
    sm = smoothing or SmoothingParams(eps_norm=1e-12)
    res = feasibility_residuals(state, geom, sm)
    if previous is not None:
        if previous not in _MODE_OF:
            raise ValueError(f"unknown label {previous!r}")
        if _worst(res[_MODE_OF[previous]]) <= hysteresis:
            return previous
    worst = [_worst(res[_MODE_OF[lab]]) for lab in LABELS]
    for lab, w in zip(LABELS, worst):
        if w <= 0.0:
            return lab
    return LABELS[int(np.argmin(worst))]


def plant_tension(d_eff, d_eff_rate, config: PlantConfig, T_max: float, L0: float = BodyGeometry.L0):
    """Unilateral spring-damper tension saturated to ``[0, T_max]``."""
    raw = config.k_c * (np.asarray(d_eff, dtype=float) - L0) + config.b_c * np.asarray(d_eff_rate, dtype=float)
    return np.clip(raw, 0.0, T_max)


@dataclass
class RolloutRecord:
    dt: float
    states: np.ndarray  # (K+1, 10)
    tension: np.ndarray  # (K,)
    d_eff: np.ndarray
    labels: list[str]
    controls: np.ndarray  # (K, 2)
    dtau_eff: np.ndarray
    status: str = "Completed"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        K = len(self.labels)
        if not (self.tension.shape == (K,) and self.d_eff.shape == (K,) and self.dtau_eff.shape == (K,)
                and self.controls.shape == (K, 2) and self.states.shape[0] == K + 1):
            raise ValueError("rollout record series lengths differ")
        bad = set(self.labels) - set(LABELS)
        if bad:
            raise ValueError(f"unknown labels {sorted(bad)}")

    @property
    def n_steps(self) -> int:
        return len(self.labels)

    @property
    def wrap_active(self) -> np.ndarray:
        return np.array([lab != "direct" for lab in self.labels], dtype=bool)

    # ---- serialization --------------------------------------------------------
    COLUMNS = ("k", "t", "px", "py", "theta", "vx", "vy", "omega", "gx", "gy", "gvx", "gvy",
               "T", "d_eff", "mode", "ux", "uy", "dtau_eff")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema={ROLLOUT_SCHEMA} dt={self.dt!r} status={self.status}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for k in range(self.n_steps):
            z = self.states[k]
            w.writerow([k, repr(k * self.dt), *map(repr, z.tolist()), repr(float(self.tension[k])),
                        repr(float(self.d_eff[k])), self.labels[k], repr(float(self.controls[k, 0])),
                        repr(float(self.controls[k, 1])), repr(float(self.dtau_eff[k]))])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema": ROLLOUT_SCHEMA,
            "dt": self.dt,
            "status": self.status,
            "states": self.states.tolist(),
            "tension": self.tension.tolist(),
            "d_eff": self.d_eff.tolist(),
            "labels": list(self.labels),
            "controls": self.controls.tolist(),
            "dtau_eff": self.dtau_eff.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RolloutRecord":
        if d.get("schema") != ROLLOUT_SCHEMA:
            raise ValueError(f"unsupported rollout schema {d.get('schema')!r}")
        return cls(
            dt=float(d["dt"]),
            states=np.asarray(d["states"], dtype=float).reshape(-1, 10),
            tension=np.asarray(d["tension"], dtype=float),
            d_eff=np.asarray(d["d_eff"], dtype=float),
            labels=list(d["labels"]),
            controls=np.asarray(d["controls"], dtype=float).reshape(-1, 2),
            dtau_eff=np.asarray(d["dtau_eff"], dtype=float),
            status=d.get("status", "Completed"),
            meta=dict(d.get("meta", {})),
        )

    def save(self, csv_path=None, json_path=None) -> None:
        if csv_path is not None:
            Path(csv_path).write_text(self.to_csv(), encoding="utf-8")
        if json_path is not None:
            Path(json_path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")


_SHARP = SmoothingParams(eps_norm=1e-12)


def label_length(state: State, geom: BodyGeometry, label: str) -> float:
    m = _MODE_OF[label]
    if m == "d":
        return float(effective_length_direct(state, geom, _SHARP))
    return float(effective_length_vertex(state, geom, m, _SHARP))


def label_wrench(state: State, geom: BodyGeometry, label: str, T: float):
    m = _MODE_OF[label]
    if m == "d":
        return wrench_direct(state, geom, T, _SHARP)
    return wrench_vertex(state, geom, m, T, _SHARP)


def label_torque_gap(state: State, geom: BodyGeometry, label: str) -> float:
    """Unit-tension torque difference of the labelled routing; exactly 0 for direct."""
    m = _MODE_OF[label]
    if m == "d":
        return 0.0
    return float(unit_torque_gap(state, geom, _SHARP, m))


def plant_step(state: State, label: str, T: float, u, params: PhysicalParams, geom: BodyGeometry, h: float) -> State:
    """One semi-implicit sub-step of length ``h`` with hard routing ``label``."""
    w, xi = label_wrench(state, geom, label, T)
    ext = external_wrench(state.v_b, state.omega, params)
    vx = state.vx + h / params.box_mass * (w.F.x - ext.F.x)
    vy = state.vy + h / params.box_mass * (w.F.y - ext.F.y)
    om = state.omega + h / params.box_inertia * (w.tau - ext.tau)
    b = params.grip_damping
    gvx = state.gvx + h / params.grip_mass * (u[0] - b * state.gvx + xi.x)
    gvy = state.gvy + h / params.grip_mass * (u[1] - b * state.gvy + xi.y)
    return State(state.px + h * vx, state.py + h * vy, state.theta + h * om, vx, vy, om,
                 state.gx + h * gvx, state.gy + h * gvy, gvx, gvy)


def kinetic_energy(state: State, params: PhysicalParams) -> float:
    return 0.5 * (
        params.box_mass * (state.vx**2 + state.vy**2)
        + params.box_inertia * state.omega**2
        + params.grip_mass * (state.gvx**2 + state.gvy**2)
    )


def rollout(plan, scene=None, config: PlantConfig | None = None, params: PhysicalParams | None = None,
            geom: BodyGeometry | None = None) -> RolloutRecord:
    """Open-loop replay of a plan's gripper trajectory on the numeric plant.

    ``plan`` needs ``states`` (N+1, 10) and ``dt``.  ``params`` are the
    nominal physical parameters; ``config.param_scale`` (and any per-field
    overrides) is applied on top before stepping.
    """
    config = config or PlantConfig()
    geom = geom or BodyGeometry.square()
    dt = float(plan.dt)
    base = params or PhysicalParams(dt=dt)
    prm = config.scaled_params(base)
    Z = np.asarray(plan.states, dtype=float)
    N = Z.shape[0] - 1
    meta = {
        "scene": getattr(scene, "name", None),
        "param_scale": config.param_scale,
        "scale_overrides": dict(config.scale_overrides),
        "plant": {k: getattr(config, k) for k in ("k_c", "b_c", "pd_kp", "pd_kd", "classifier_hysteresis", "substeps")},
        "plan_variant": getattr(plan, "variant", None),
    }
    z0 = np.asarray(scene.initial_state if scene is not None else Z[0], dtype=float) if N >= 0 else None
    if N <= 0:
        return RolloutRecord(dt, Z[:1] if N == 0 else np.zeros((1, 10)), np.zeros(0), np.zeros(0), [],
                             np.zeros((0, 2)), np.zeros(0), meta=meta)

    n_sub = int(config.substeps)
    h = dt / n_sub
    state = State.from_array(z0)
    states = [z0.copy()]
    T_rec, d_rec, labels, u_rec, dtau = [], [], [], [], []
    label, d_prev = None, None
    status = "Completed"
    for k in range(N):
        g0, g1, vref = Z[k, 6:8], Z[k + 1, 6:8], Z[k + 1, 8:10]
        T_sum, u_sum = 0.0, np.zeros(2)
        for j in range(n_sub):
            label = classify_mode(state, geom, label, config.classifier_hysteresis, _SHARP)
            d = label_length(state, geom, label)
            rate = 0.0 if d_prev is None else (d - d_prev) / h
            d_prev = d
            T = float(plant_tension(d, rate, config, prm.T_max, geom.L0))
            xref = g0 + (j / n_sub) * (g1 - g0)
            u = config.pd_kp * (xref - np.array([state.gx, state.gy])) + config.pd_kd * (vref - np.array([state.gvx, state.gvy]))
            if j == 0:
                labels.append(label)
                d_rec.append(d)
                dtau.append(label_torque_gap(state, geom, label))
            T_sum += T
            u_sum += u
            state = plant_step(state, label, T, u, prm, geom, h)
        z = state.to_array()
        T_rec.append(T_sum / n_sub)
        u_rec.append(u_sum / n_sub)
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > 1e6:
            status = "Diverged"
            states.append(np.where(np.isfinite(z), z, np.nan))
            break
        states.append(z)
    return RolloutRecord(
        dt=dt,
        states=np.array(states),
        tension=np.array(T_rec),
        d_eff=np.array(d_rec),
        labels=labels,
        controls=np.array(u_rec).reshape(-1, 2),
        dtau_eff=np.array(dtau),
        status=status,
        meta=meta,
    )
