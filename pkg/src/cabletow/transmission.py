"""Mode-conditioned cable wrench maps and their weighted aggregation."""

from __future__ import annotations

from typing import Mapping, NamedTuple

import numpy as np

from . import ad
from .geometry import (
    BodyGeometry,
    SmoothingParams,
    Vec2,
    body_to_world,
    effective_length_direct,
    effective_length_redirected,
    effective_length_vertex,
    gate_sigma,
    redirection_point,
    smooth_unit,
    vertex_point,
)


class Wrench(NamedTuple):
    F: Vec2
    tau: object


class ModeWeights(Mapping):
    """Ordered routing weights over a mode set; each in [0, 1], summing to 1."""

    def __init__(self, weights: Mapping[str, float] | None = None, **kw):
        items = dict(weights or {}, **kw)
        if not items:
            raise ValueError("ModeWeights needs at least one mode")
        for m, w in items.items():
            if m not in ("d", "u", "l", "r"):
                raise ValueError(f"unknown mode {m!r}")
            if not (-1e-12 <= float(w) <= 1 + 1e-12):
                raise ValueError(f"weight for mode {m!r} outside [0, 1]: {w}")
        total = sum(float(w) for w in items.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mode weights sum to {total}, not 1")
        self._w = items

    @classmethod
    def one_hot(cls, mode: str, modes=("d", "u", "l")) -> "ModeWeights":
        return cls({m: float(m == mode) for m in modes})

    @classmethod
    def gate(cls, sigma: float) -> "ModeWeights":
        return cls(d=float(sigma), r=1.0 - float(sigma))

    def __getitem__(self, m):
        return self._w[m]

    def __iter__(self):
        return iter(self._w)

    def __len__(self):
        return len(self._w)

    def __repr__(self):
        return f"ModeWeights({self._w!r})"


def _check_weights(gamma: Mapping):
    vals = list(gamma.values())
    if any(isinstance(v, ad.Dual) for v in vals):
        return
    total = np.sum([np.asarray(v, dtype=float) for v in vals], axis=0)
    if np.max(np.abs(total - 1.0)) > 1e-6:
        raise ValueError(f"malformed mode weights: sum deviates from 1 by {np.max(np.abs(total - 1.0)):.3e}")


def wrench_direct(state, geom: BodyGeometry, T, smoothing: SmoothingParams) -> tuple[Wrench, Vec2]:
    p_a = body_to_world(state, geom.p_a_body)
    F = smooth_unit(state.x_g - p_a, smoothing.eps_norm) * T
    r_a = p_a - state.p_b
    return Wrench(F, r_a.cross(F)), -F


def wrench_via(state, geom: BodyGeometry, p_v: Vec2, T, eps: float) -> tuple[Wrench, Vec2]:
    """Wrench when the cable is redirected frictionlessly at world point ``p_v``."""
    p_a = body_to_world(state, geom.p_a_body)
    e_av = smooth_unit(p_v - p_a, eps)
    e_vg = smooth_unit(state.x_g - p_v, eps)
    F_av = e_av * T
    F_vv = (e_vg - e_av) * T
    F = F_av + F_vv
    tau = (p_a - state.p_b).cross(F_av) + (p_v - state.p_b).cross(F_vv)
    return Wrench(F, tau), -F


def wrench_vertex(state, geom: BodyGeometry, vertex: str, T, smoothing: SmoothingParams):
    return wrench_via(state, geom, vertex_point(state, geom, vertex), T, smoothing.eps_norm)


def wrench_redirected(state, geom: BodyGeometry, T, smoothing: SmoothingParams):
    return wrench_via(state, geom, redirection_point(state, geom, smoothing), T, smoothing.eps_norm)


def mode_length(state, geom, mode: str, smoothing):
    if mode == "d":
        return effective_length_direct(state, geom, smoothing)
    if mode == "r":
        return effective_length_redirected(state, geom, smoothing)
    return effective_length_vertex(state, geom, mode, smoothing)


def mode_wrench(state, geom, mode: str, T, smoothing):
    if mode == "d":
        return wrench_direct(state, geom, T, smoothing)
    if mode == "r":
        return wrench_redirected(state, geom, T, smoothing)
    return wrench_vertex(state, geom, mode, T, smoothing)


def aggregate_transmission(state, geom: BodyGeometry, T, gamma: Mapping, smoothing: SmoothingParams,
                           check: bool = True):
    """Weighted effective length, wrench and gripper reaction over ``gamma``'s modes.

    Modes with a literal zero weight are skipped, which keeps one-hot schedules
    exact and cheap.  ``check=False`` admits off-simplex weights, as seen by
    optimizer iterates whose simplex equality is not yet satisfied.
    """
    if check:
        _check_weights(gamma)
    d_eff = 0.0
    Fx = Fy = tau = 0.0
    for m, w in gamma.items():
        if not isinstance(w, ad.Dual) and np.all(np.asarray(w) == 0.0):
            continue
        d = mode_length(state, geom, m, smoothing)
        wr, _ = mode_wrench(state, geom, m, T, smoothing)
        d_eff = d_eff + w * d
        Fx = Fx + w * wr.F.x
        Fy = Fy + w * wr.F.y
        tau = tau + w * wr.tau
    F = Vec2(Fx, Fy)
    return d_eff, Wrench(F, tau), -F


def unit_torque_gap(state, geom, smoothing, mode: str = "r"):
    """Unit-tension torque difference between routing ``mode`` and direct routing."""
    tau_m = mode_wrench(state, geom, mode, 1.0, smoothing)[0].tau
    tau_d = wrench_direct(state, geom, 1.0, smoothing)[0].tau
    return tau_m - tau_d


def torque_diagnostic(state, geom: BodyGeometry, gamma_or_gate, variant: str, smoothing: SmoothingParams):
    """Effective torque-channel difference for a mode representation.

    ``gamma_or_gate`` is the gate ``sigma`` for IMR (``None`` recomputes it from
    the state), the redirected indicator for BMR, and a mapping with ``u``/``l``
    simplex weights for FMR.
    """
    variant = variant.upper()
    if variant == "IMR":
        sigma = gate_sigma(state, geom, smoothing) if gamma_or_gate is None else gamma_or_gate
        return (1.0 - sigma) * unit_torque_gap(state, geom, smoothing, "r")
    if variant == "BMR":
        return gamma_or_gate * unit_torque_gap(state, geom, smoothing, "r")
    if variant in ("FMR", "REF"):
        out = 0.0
        for m in ("u", "l"):
            w = gamma_or_gate.get(m, 0.0)
            if isinstance(w, ad.Dual) or np.any(np.asarray(w) != 0.0):
                out = out + w * unit_torque_gap(state, geom, smoothing, m)
        return out
    raise ValueError(f"unknown variant {variant!r}")
