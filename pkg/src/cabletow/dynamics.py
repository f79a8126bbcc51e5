"""Semi-implicit Newton-Euler step for the coupled box-gripper system."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from . import ad
from .geometry import BodyGeometry, SmoothingParams, State, Vec2, smooth_unit
from .transmission import Wrench, aggregate_transmission


@dataclass(frozen=True)
class PhysicalParams:
    box_mass: float = 5.0
    box_inertia: float = 0.21
    grip_mass: float = 1.0
    grip_damping: float = 2.0
    mu: float = 0.3
    lin_damping: float = 1.0
    rot_damping: float = 0.5
    gravity: float = 9.81
    # normal force for ground friction; None means box_mass * gravity
    gravity_load: float | None = None
    dt: float = 0.06
    T_max: float = 50.0
    # explicit-step friction needs dt*mu*N_load/(m*sqrt(eps_fric)) < 2
    eps_fric: float = 0.02
    omega_eps: float = 0.3
    r_fric: float = 0.1

    def __post_init__(self):
        if min(self.box_mass, self.box_inertia, self.grip_mass) <= 0:
            raise ValueError("masses and inertia must be positive")
        if self.mu < 0 or self.dt <= 0 or self.T_max <= 0:
            raise ValueError("need mu >= 0, dt > 0, T_max > 0")
        if self.eps_fric <= 0 or self.omega_eps <= 0:
            raise ValueError("friction smoothing constants must be positive")

    @property
    def normal_load(self) -> float:
        return self.box_mass * self.gravity if self.gravity_load is None else self.gravity_load

    def scaled(self, factor: float, **overrides: float) -> "PhysicalParams":
        """Scale masses, inertias, damping coefficients and mu jointly.

        Keyword ``overrides`` give per-parameter factors that replace ``factor``
        for the named fields.
        """
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        fields = ("box_mass", "box_inertia", "grip_mass", "grip_damping", "mu", "lin_damping", "rot_damping")
        unknown = set(overrides) - set(fields)
        if unknown:
            raise ValueError(f"cannot scale {sorted(unknown)}")
        kw = {f: getattr(self, f) * overrides.get(f, factor) for f in fields}
        if self.gravity_load is not None:
            kw["gravity_load"] = self.gravity_load * overrides.get("box_mass", factor)
        return replace(self, **kw)

    def friction_stability_margin(self) -> float:
        """Largest explicit-step gain of the smoothed Coulomb terms; must stay below 2."""
        lin = self.dt * self.mu * self.normal_load / (self.box_mass * self.eps_fric**0.5)
        rot = self.dt * self.mu * self.normal_load * self.r_fric / (self.box_inertia * self.omega_eps)
        return max(lin, rot)


def external_wrench(v_b: Vec2, omega, params: PhysicalParams) -> Wrench:
    """Viscous damping plus smoothed Coulomb friction resisting box motion."""
    fric = params.mu * params.normal_load
    unit = smooth_unit(v_b, params.eps_fric)
    F = v_b * params.lin_damping + unit * fric
    tau = params.rot_damping * omega + fric * params.r_fric * ad.tanh(omega / params.omega_eps)
    return Wrench(F, tau)


def step(
    state: State,
    control,
    T,
    gamma: Mapping,
    geom: BodyGeometry,
    params: PhysicalParams,
    smoothing: SmoothingParams,
    check_weights: bool = True,
) -> State:
    """Advance one step: velocities from forces, then positions from new velocities.

    ``control`` is the gripper actuation force ``(ux, uy)``; ``gamma`` the
    routing weights passed to :func:`aggregate_transmission`.  The cable
    reaction ``xi`` (equal to ``-F``) acts on the gripper.
    """
    dt = params.dt
    ux, uy = control
    _, w, xi = aggregate_transmission(state, geom, T, gamma, smoothing, check=check_weights)
    ext = external_wrench(state.v_b, state.omega, params)

    vx = state.vx + dt / params.box_mass * (w.F.x - ext.F.x)
    vy = state.vy + dt / params.box_mass * (w.F.y - ext.F.y)
    om = state.omega + dt / params.box_inertia * (w.tau - ext.tau)
    b = params.grip_damping
    gvx = state.gvx + dt / params.grip_mass * (ux - b * state.gvx + xi.x)
    gvy = state.gvy + dt / params.grip_mass * (uy - b * state.gvy + xi.y)

    return State(
        state.px + dt * vx,
        state.py + dt * vy,
        state.theta + dt * om,
        vx,
        vy,
        om,
        state.gx + dt * gvx,
        state.gy + dt * gvy,
        gvx,
        gvy,
    )
