"""Slackness, mode-gated gaps and complementarity residuals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import ad
from .geometry import BodyGeometry, SmoothingParams, effective_length_direct, effective_length_redirected


@dataclass(frozen=True)
class ComplementarityParams:
    eps_eta: float = 1e-6
    lambda_eps: float = 1e3
    lambda_eta: float = 1e3

    def __post_init__(self):
        if not self.eps_eta > 0:
            raise ValueError("eps_eta must be positive")


class GapState(NamedTuple):
    d_eff: object
    g: object
    per_mode_gaps: tuple


def gap_plain(d_eff, L0):
    return L0 - d_eff


def gated_gaps(d_d, d_r, w_d, w_r, L0, M_len):
    """Mode gaps with the inactive mode relaxed by ``M_len`` and their blend."""
    g_d = (L0 + M_len * (1.0 - w_d)) - d_d
    g_r = (L0 + M_len * (1.0 - w_r)) - d_r
    return g_d, g_r, w_d * g_d + w_r * g_r


def mode_gated_gaps(state, geom: BodyGeometry, gamma_pair, M_len: float, smoothing: SmoothingParams) -> GapState:
    w_d, w_r = gamma_pair
    if not any(isinstance(w, ad.Dual) for w in gamma_pair):
        if np.any(np.abs(np.asarray(w_d) + np.asarray(w_r) - 1.0) > 1e-9):
            raise ValueError("gate pair must sum to 1")
    d_d = effective_length_direct(state, geom, smoothing)
    d_r = effective_length_redirected(state, geom, smoothing)
    g_d, g_r, g = gated_gaps(d_d, d_r, w_d, w_r, geom.L0, M_len)
    return GapState(w_d * d_d + w_r * d_r, g, (("d", g_d), ("r", g_r)))


def ncr_eta(T, g, eps_eta: float):
    """Fischer-Burmeister-type residual, ~0 only on the complementarity set."""
    return ad.sqrt(T * T + g * g + eps_eta * eps_eta) - (T + g)


def comp_products(T_seq, g_seq) -> np.ndarray:
    T_seq = np.asarray(T_seq, dtype=float)
    g_seq = np.asarray(g_seq, dtype=float)
    if T_seq.shape != g_seq.shape:
        raise ValueError(f"length mismatch: {T_seq.shape} vs {g_seq.shape}")
    return T_seq * g_seq
