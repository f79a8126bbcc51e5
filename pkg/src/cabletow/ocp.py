"""Multiple-shooting NLP assembly for the fixed-schedule reference, FMR, BMR and IMR.

Every residual and objective term is *stage local*: stage ``k`` only reads
``(z_k, z_{k+1}, u_k, T_k)`` and the variant's per-step mode/slack variables.
The model is therefore evaluated once for all stages at the same time, with
forward-mode tangents over the ~25 local variables, and derivatives are kept as
dense per-stage blocks that the solver scatters through ``stage_index``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from . import ad
from .dynamics import PhysicalParams, step
from .geometry import (
    STATE_DIM,
    BodyGeometry,
    SmoothingParams,
    State,
    body_to_world,
    effective_length_direct,
    effective_length_redirected,
    effective_length_vertex,
    feasibility_residuals,
    gate_coordinate,
    gate_sigma,
    redirected_wedge,
    selector_rho,
)
from .tensioning import ComplementarityParams, gated_gaps, ncr_eta
from .transmission import torque_diagnostic

CONTROL_DIM = 2


class Variant(str, enum.Enum):
    REF = "ref"
    FMR = "fmr"
    BMR = "bmr"
    IMR = "imr"

    @classmethod
    def parse(cls, v) -> "Variant":
        if isinstance(v, cls):
            return v
        try:
            return cls(str(v).lower())
        except ValueError:
            raise ValueError(f"unknown variant {v!r}; expected one of {[m.value for m in cls]}") from None


@dataclass(frozen=True)
class CostWeights:
    """Quadratic tracking/effort weights and relaxation penalty weights.

    ``Q``/``Q_N`` act on the box pose error ``(x, y, theta)``; ``R`` on the
    gripper force in newtons; ``r_T`` on the normalized tension ``T/T_max``.
    ``Q_N=None`` means ten times ``Q``.  The complementarity weights
    ``lambda_eps``/``lambda_eta`` live in :class:`ComplementarityParams`.
    """

    Q: tuple[float, float, float] = (50.0, 50.0, 0.5)
    Q_N: tuple[float, float, float] | None = None
    R: tuple[float, float] = (1e-4, 1e-4)
    r_T: float = 1e-3
    lambda_onehot: float = 1e1
    lambda_bin: float = 1e2

    @property
    def terminal(self) -> tuple[float, float, float]:
        return tuple(10.0 * q for q in self.Q) if self.Q_N is None else tuple(self.Q_N)

    def __post_init__(self):
        vals = list(self.Q) + list(self.terminal) + list(self.R) + [self.r_T, self.lambda_onehot, self.lambda_bin]
        if min(vals) < 0:
            raise ValueError("cost weights must be nonnegative")


@dataclass(frozen=True)
class BigM:
    M_psi: float = 4.0
    M_len: float | None = None  # None means 4 * L0
    M_hs: float = 4.0
    M_w: float = 4.0

    def length(self, L0: float) -> float:
        return 4.0 * L0 if self.M_len is None else self.M_len


@dataclass(frozen=True)
class Bounds:
    pos: float = 50.0
    theta: float = 4 * np.pi
    v_box: float = 3.0
    omega: float = 6.0
    v_grip: float = 4.0
    u_max: float = 100.0
    eps_max: float = 10.0

    def state_box(self) -> tuple[np.ndarray, np.ndarray]:
        hi = np.array(
            [self.pos, self.pos, self.theta, self.v_box, self.v_box, self.omega,
             self.pos, self.pos, self.v_grip, self.v_grip]
        )
        return -hi, hi


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class OcpSpec:
    """Everything needed to build one NLP.

    ``reference`` holds the box pose reference ``(x, y, theta)`` for steps
    ``0..N`` and ``z0`` the fixed initial state.  ``wedge_normal`` picks the
    orientation of the redirected-mode normal wedge condition: ``"behind"``
    requires the gripper behind the anchored face plane when redirected,
    ``"outward"`` the opposite inequality.
    """

    reference: np.ndarray
    z0: np.ndarray
    params: PhysicalParams = field(default_factory=PhysicalParams)
    geom: BodyGeometry = field(default_factory=BodyGeometry.square)
    smoothing: SmoothingParams = field(default_factory=SmoothingParams)
    comp: ComplementarityParams = field(default_factory=ComplementarityParams)
    weights: CostWeights = field(default_factory=CostWeights)
    bigM: BigM = field(default_factory=BigM)
    bounds: Bounds = field(default_factory=Bounds)
    obstacles: tuple[Obstacle, ...] = ()
    grip_radius: float = 0.05
    # minimum gripper-to-anchor distance; 0 disables the constraint
    standoff: float = 0.2
    wedge_normal: str = "behind"
    name: str = "scene"

    def __post_init__(self):
        ref = np.asarray(self.reference, dtype=float)
        if ref.ndim != 2 or ref.shape[1] != 3 or ref.shape[0] < 3:
            raise ValueError("reference must have shape (N+1, 3) with N >= 2")
        object.__setattr__(self, "reference", ref)
        z0 = np.asarray(self.z0, dtype=float)
        if z0.shape != (STATE_DIM,):
            raise ValueError(f"z0 must have shape ({STATE_DIM},)")
        object.__setattr__(self, "z0", z0)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        M = self.bigM
        if min(M.M_psi, M.length(self.geom.L0), M.M_hs, M.M_w) <= 0:
            raise ValueError("big-M constants must be positive")
        if self.standoff < 0:
            raise ValueError("standoff must be nonnegative")
        if self.wedge_normal not in ("behind", "outward"):
            raise ValueError("wedge_normal must be 'behind' or 'outward'")

    @property
    def N(self) -> int:
        return self.reference.shape[0] - 1

    def with_(self, **kw) -> "OcpSpec":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# decision layout


class DecisionLayout:
    """Deterministic index map of the flattened decision vector.

    Global blocks in order: ``z`` (N+1, 10), ``u`` (N, 2), ``T`` (N,), then the
    variant's mode variables (``delta`` (N, 3) for FMR, ``dr`` (N,) for BMR) and
    complementarity slacks ``eps`` (N,) for REF/FMR.
    """

    def __init__(self, N: int, variant: Variant, n_z: int = STATE_DIM, n_u: int = CONTROL_DIM):
        variant = Variant.parse(variant)
        if N < 2:
            raise ValueError("N must be at least 2")
        self.N, self.variant, self.n_z, self.n_u = N, variant, n_z, n_u
        blocks = [("z", (N + 1, n_z)), ("u", (N, n_u)), ("T", (N,))]
        if variant is Variant.FMR:
            blocks.append(("delta", (N, 3)))
        if variant is Variant.BMR:
            blocks.append(("dr", (N,)))
        if variant in (Variant.REF, Variant.FMR):
            blocks.append(("eps", (N,)))
        self.blocks: dict[str, tuple[slice, tuple[int, ...]]] = {}
        off = 0
        for name, shape in blocks:
            size = int(np.prod(shape))
            self.blocks[name] = (slice(off, off + size), shape)
            off += size
        self.n_vars = off
        self.stage_index, self.local_names = self._stage_index()
        self.nloc = self.stage_index.shape[1]

    def _indices(self, name):
        sl, shape = self.blocks[name]
        return np.arange(sl.start, sl.stop).reshape(shape)

    def _stage_index(self):
        N = self.N
        z = self._indices("z")
        cols = [z[:-1], z[1:], self._indices("u"), self._indices("T")[:, None]]
        names = [f"z0.{i}" for i in range(self.n_z)] + [f"z1.{i}" for i in range(self.n_z)]
        names += [f"u.{i}" for i in range(self.n_u)] + ["T"]
        if "delta" in self.blocks:
            cols.append(self._indices("delta"))
            names += ["delta.d", "delta.u", "delta.l"]
        if "dr" in self.blocks:
            cols.append(self._indices("dr")[:, None])
            names.append("dr")
        if "eps" in self.blocks:
            cols.append(self._indices("eps")[:, None])
            names.append("eps")
        idx = np.concatenate(cols, axis=1)
        assert idx.shape[0] == N
        return idx, names

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,):
            raise ValueError(f"expected vector of length {self.n_vars}, got {x.shape}")
        return {name: x[sl].reshape(shape).copy() for name, (sl, shape) in self.blocks.items()}

    def pack(self, parts: dict[str, np.ndarray]) -> np.ndarray:
        x = np.zeros(self.n_vars)
        missing = set(self.blocks) - set(parts)
        if missing:
            raise ValueError(f"missing blocks {sorted(missing)}")
        for name, (sl, shape) in self.blocks.items():
            x[sl] = np.asarray(parts[name], dtype=float).reshape(shape).ravel()
        return x

    def local(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.stage_index]

    def scatter_vector(self, loc: np.ndarray) -> np.ndarray:
        return np.bincount(self.stage_index.ravel(), weights=loc.ravel(), minlength=self.n_vars)

    def scatter_matrix(self, blocks: np.ndarray):
        """Sum per-stage ``(nloc, nloc)`` blocks into a sparse global matrix."""
        import scipy.sparse as sp

        idx = self.stage_index
        rows = np.broadcast_to(idx[:, :, None], blocks.shape).ravel()
        cols = np.broadcast_to(idx[:, None, :], blocks.shape).ravel()
        return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(self.n_vars, self.n_vars))

    def jacobian_matrix(self, der: np.ndarray):
        """Sparse Jacobian from stage blocks ``(N, m, nloc)``; rows stage-major."""
        import scipy.sparse as sp

        N, m, nloc = der.shape
        rows = np.broadcast_to(np.arange(N * m).reshape(N, m, 1), der.shape).ravel()
        cols = np.broadcast_to(self.stage_index[:, None, :], der.shape).ravel()
        return sp.csr_matrix((der.ravel(), (rows, cols)), shape=(N * m, self.n_vars))


def layout_variables(spec: OcpSpec, variant) -> DecisionLayout:
    return DecisionLayout(spec.N, variant)


# ---------------------------------------------------------------------------
# evaluation containers


@dataclass
class Evaluation:
    f: float
    terms: dict[str, float]
    eq: np.ndarray  # (N, m_eq)
    ineq: np.ndarray  # (N, m_in)
    grad_loc: np.ndarray | None = None
    eq_der: np.ndarray | None = None
    ineq_der: np.ndarray | None = None
    hess_loc: np.ndarray | None = None


@dataclass
class CostBreakdown:
    J_track: float
    J_terminal: float
    J_control: float
    J_Treg: float
    J_eps: float
    J_1hot: float
    J_eta: float
    J_bin: float
    lambdas: dict[str, float]

    @property
    def total(self) -> float:
        lam = self.lambdas
        return (
            self.J_track + self.J_terminal + self.J_control + self.J_Treg
            + lam["eps"] * self.J_eps + lam["onehot"] * self.J_1hot
            + lam["eta"] * self.J_eta + lam["bin"] * self.J_bin
        )

    def as_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["total"] = self.total
        return d


@dataclass
class Solution:
    variant: str
    dt: float
    states: np.ndarray  # (N+1, 10)
    controls: np.ndarray  # (N, 2)
    tension: np.ndarray  # (N,)
    mode_names: tuple[str, ...]
    mode_weights: np.ndarray  # (N, K)
    sigma: np.ndarray  # (N,) gate at z_k
    rho: np.ndarray  # (N,) selector at z_k
    d_eff: np.ndarray
    gap: np.ndarray
    comp: np.ndarray  # normalized T*g
    dtau_eff: np.ndarray
    wrap_active: np.ndarray
    reference: np.ndarray
    costs: dict[str, Any] = field(default_factory=dict)
    violations: dict[str, float] = field(default_factory=dict)
    status: str = "Unsolved"

    @property
    def N(self) -> int:
        return self.controls.shape[0]


_MULT_KEYS = ("eps", "eta", "bin", "onehot")


class NlpProblem:
    """A built, immutable NLP: bounds, objective and residuals over stage blocks.

    Equalities ``eq(x) = 0`` and inequalities ``ineq(x) <= 0``; both are
    returned as ``(N, m)`` stage-major arrays whose block columns are named in
    ``eq_blocks``/``ineq_blocks``.
    """

    def __init__(self, spec: OcpSpec, variant, schedule=None, multipliers: dict | None = None):
        self.spec = spec
        self.variant = Variant.parse(variant)
        self.layout = DecisionLayout(spec.N, self.variant)
        self.N = spec.N
        if self.variant is Variant.REF:
            if schedule is None:
                raise ValueError("reference problem needs a mode schedule")
            self.schedule = _check_schedule(schedule, spec.N)
        else:
            self.schedule = None
        mult = {k: 1.0 for k in _MULT_KEYS}
        for k, v in (multipliers or {}).items():
            if k not in mult:
                raise ValueError(f"unknown penalty multiplier {k!r}")
            mult[k] = float(v)
        self.multipliers = mult
        self.lb, self.ub = self._bounds()
        self.x_scale = self._scales()
        probe = self._stage(self.layout.local(np.clip(np.zeros(self.layout.n_vars), self.lb, self.ub)), False)
        self.eq_blocks = _block_slices(probe["eq"])
        self.ineq_blocks = _block_slices(probe["ineq"])
        self.n_eq = self.N * sum(s.stop - s.start for s in self.eq_blocks.values())
        self.n_ineq = self.N * sum(s.stop - s.start for s in self.ineq_blocks.values())

    @property
    def n_vars(self) -> int:
        return self.layout.n_vars

    def with_multipliers(self, **mult) -> "NlpProblem":
        m = dict(self.multipliers)
        m.update(mult)
        return NlpProblem(self.spec, self.variant, self.schedule, m)

    @property
    def lambdas(self) -> dict[str, float]:
        c, w, m = self.spec.comp, self.spec.weights, self.multipliers
        return {
            "eps": c.lambda_eps * m["eps"],
            "eta": c.lambda_eta * m["eta"],
            "bin": w.lambda_bin * m["bin"],
            "onehot": w.lambda_onehot * m["onehot"],
        }

    # ---- bounds / scaling ---------------------------------------------------
    def _bounds(self):
        lay, spec = self.layout, self.spec
        lo, hi = {}, {}
        zlo, zhi = spec.bounds.state_box()
        lo["z"] = np.tile(zlo, (self.N + 1, 1))
        hi["z"] = np.tile(zhi, (self.N + 1, 1))
        lo["z"][0] = hi["z"][0] = spec.z0
        lo["u"] = np.full((self.N, CONTROL_DIM), -spec.bounds.u_max)
        hi["u"] = -lo["u"]
        lo["T"], hi["T"] = np.zeros(self.N), np.full(self.N, spec.params.T_max)
        if "delta" in lay.blocks:
            lo["delta"], hi["delta"] = np.zeros((self.N, 3)), np.ones((self.N, 3))
        if "dr" in lay.blocks:
            lo["dr"], hi["dr"] = np.zeros(self.N), np.ones(self.N)
        if "eps" in lay.blocks:
            lo["eps"], hi["eps"] = np.zeros(self.N), np.full(self.N, spec.bounds.eps_max)
        return lay.pack(lo), lay.pack(hi)

    def _scales(self):
        lay = self.layout
        parts = {name: np.ones(shape) for name, (_, shape) in lay.blocks.items()}
        parts["T"] = np.full(self.N, self.spec.params.T_max)
        parts["u"] = np.full((self.N, CONTROL_DIM), 10.0)
        return lay.pack(parts)

    # ---- the stage model ------------------------------------------------------
    def _stage(self, Y: np.ndarray, derivatives: bool) -> dict:
        spec, lay = self.spec, self.layout
        p, geom, sm, comp = spec.params, spec.geom, spec.smoothing, spec.comp
        W, M = spec.weights, spec.bigM
        L0, M_len, T_max = geom.L0, M.length(geom.L0), p.T_max
        N = self.N

        cols = ad.Dual.seed(Y) if derivatives else [Y[:, j] for j in range(Y.shape[1])]
        names = lay.local_names
        at = {n: i for i, n in enumerate(names)}
        z0 = State(*cols[0:STATE_DIM])
        z1 = State(*cols[STATE_DIM : 2 * STATE_DIM])
        u = cols[at["u.0"] : at["u.0"] + CONTROL_DIM]
        T = cols[at["T"]]
        Tn = T / T_max

        eq, ineq = {}, {}
        lsq = []  # (name, weight, residual)
        scal = []  # (name, per-stage value)
        v = self.variant
        lam = self.lambdas

        if v in (Variant.REF, Variant.FMR):
            if v is Variant.FMR:
                delta = {m: cols[at[f"delta.{m}"]] for m in ("d", "u", "l")}
            else:
                delta = {m: self.schedule[:, i] for i, m in enumerate(("d", "u", "l"))}
            eps = cols[at["eps"]]
            gamma = delta
            lengths = {
                "d": effective_length_direct(z0, geom, sm),
                "u": effective_length_vertex(z0, geom, "u", sm),
                "l": effective_length_vertex(z0, geom, "l", sm),
            }
            d_eff = sum(delta[m] * lengths[m] for m in ("d", "u", "l"))
            gn = (L0 - d_eff) / L0
            ineq["gap_nonneg"] = [-gn]
            ineq["comp"] = [Tn * gn - eps]
            psi = feasibility_residuals(z0, geom, sm)
            ineq["feas"] = [r - M.M_psi * (1.0 - delta[m]) for m in ("d", "u", "l") for r in psi[m]]
            ineq["inext"] = [(lengths[m] - L0 - M_len * (1.0 - delta[m])) / L0 for m in ("d", "u", "l")]
            scal.append(("eps", eps))
            if v is Variant.FMR:
                eq["simplex"] = [delta["d"] + delta["u"] + delta["l"] - 1.0]
                scal.append(("onehot", sum(delta[m] * (1.0 - delta[m]) for m in ("d", "u", "l"))))
        else:
            if v is Variant.BMR:
                w_r = cols[at["dr"]]
                w_d = 1.0 - w_r
                scal.append(("bin", w_r * (1.0 - w_r)))
            else:
                w_d = gate_sigma(z0, geom, sm)
                w_r = 1.0 - w_d
            gamma = {"d": w_d, "r": w_r}
            d_d = effective_length_direct(z0, geom, sm)
            d_r = effective_length_redirected(z0, geom, sm)
            g_d, g_r, g = gated_gaps(d_d, d_r, w_d, w_r, L0, M_len)
            ineq["gap_nonneg"] = [-g / L0]
            s_bar = gate_coordinate(z0, geom, sm)
            ineq["partition"] = [-s_bar - M.M_hs * (1.0 - w_d), s_bar - M.M_hs * (1.0 - w_r)]
            wn, wt = redirected_wedge(z0, geom, sm)
            sign = 1.0 if spec.wedge_normal == "behind" else -1.0
            ineq["wedge"] = [sign * wn - M.M_w * (1.0 - w_r), -wt - M.M_w * (1.0 - w_r)]
            ineq["inext"] = [-g_d / L0, -g_r / L0]
            lsq.append(("eta", lam["eta"] * w_d, ncr_eta(Tn, g_d / L0, comp.eps_eta)))
            lsq.append(("eta", lam["eta"] * w_r, ncr_eta(Tn, g_r / L0, comp.eps_eta)))

        nxt = step(z0, u, T, gamma, geom, p, sm, check_weights=v is not Variant.FMR)
        eq["dyn"] = [a - b for a, b in zip(z1, nxt)]

        if spec.standoff > 0:
            # keeps the gripper off the anchor, where the routing unit vectors are ill-defined
            ra = z1.x_g - body_to_world(z1, geom.p_a_body)
            ineq["standoff"] = [(spec.standoff**2 - ra.dot(ra)) / L0**2]

        for ob in spec.obstacles:
            cx, cy = ob.center
            rb = ob.radius + geom.circumradius
            rg = ob.radius + spec.grip_radius
            ineq["obstacle"] = ineq.get("obstacle", []) + [
                rb * rb - ((z1.px - cx) ** 2 + (z1.py - cy) ** 2),
                rg * rg - ((z1.gx - cx) ** 2 + (z1.gy - cy) ** 2),
            ]

        ref = spec.reference[1:]
        err = [z1.px - ref[:, 0], z1.py - ref[:, 1], z1.theta - ref[:, 2]]
        last = np.zeros(N)
        last[-1] = 1.0
        for i in range(3):
            lsq.append(("track", np.full(N, W.Q[i]), err[i]))
            lsq.append(("terminal", W.terminal[i] * last, err[i]))
        for i in range(CONTROL_DIM):
            lsq.append(("control", np.full(N, W.R[i]), u[i]))
        lsq.append(("Treg", np.full(N, W.r_T), Tn))

        return {"eq": eq, "ineq": ineq, "lsq": lsq, "scal": scal, "derivatives": derivatives}

    # ---- public evaluation ----------------------------------------------------
    def evaluate(self, x: np.ndarray, derivatives: bool = False) -> Evaluation:
        return self.evaluate_local(self.layout.local(x), derivatives)

    def evaluate_local(self, Y: np.ndarray, derivatives: bool = False) -> Evaluation:
        """Evaluate from stage-local variables ``Y`` of shape ``(N, nloc)``.

        Rows need not be consistent with one global ``x``; each stage only
        sees its own row.
        """
        out = self._stage(Y, derivatives)
        N, nloc = Y.shape
        lam = self.lambdas
        terms = {}
        f = 0.0
        grad = np.zeros((N, nloc)) if derivatives else None
        hess = np.zeros((N, nloc, nloc)) if derivatives else None

        for name, w, r in out["lsq"]:
            wv, rv = ad.value(w), ad.value(r)
            rv = np.broadcast_to(rv, (N,))
            wv = np.broadcast_to(wv, (N,))
            val = float(np.sum(wv * rv * rv))
            terms[name] = terms.get(name, 0.0) + val
            f += val
            if derivatives:
                if isinstance(r, ad.Dual):
                    rd = _der(r, N, nloc)
                    grad += (2.0 * wv * rv)[:, None] * rd
                    hess += 2.0 * wv[:, None, None] * rd[:, :, None] * rd[:, None, :]
                if isinstance(w, ad.Dual):
                    grad += (rv * rv)[:, None] * _der(w, N, nloc)
        for name, s in out["scal"]:
            sv = np.broadcast_to(ad.value(s), (N,))
            val = float(np.sum(sv))
            weight = {"eps": lam["eps"], "onehot": lam["onehot"], "bin": lam["bin"]}[name]
            terms[name] = terms.get(name, 0.0) + weight * val
            f += weight * val
            if derivatives and isinstance(s, ad.Dual):
                grad += weight * _der(s, N, nloc)

        eq = _stack_block(out["eq"], N, nloc, derivatives)
        ineq = _stack_block(out["ineq"], N, nloc, derivatives)
        return Evaluation(f, terms, eq[0], ineq[0], grad, eq[1], ineq[1], hess)

    def objective(self, x) -> float:
        return self.evaluate(x).f

    def eq(self, x) -> np.ndarray:
        return self.evaluate(x).eq.ravel()

    def ineq(self, x) -> np.ndarray:
        return self.evaluate(x).ineq.ravel()

    def residual_blocks(self, x) -> dict[str, np.ndarray]:
        """Named ``(N, m)`` residual blocks (equalities prefixed ``eq.``)."""
        ev = self.evaluate(x)
        out = {f"eq.{k}": ev.eq[:, s] for k, s in self.eq_blocks.items()}
        out.update({f"ineq.{k}": ev.ineq[:, s] for k, s in self.ineq_blocks.items()})
        return out

    def breakdown(self, x) -> CostBreakdown:
        ev = self.evaluate(x)
        lam = self.lambdas
        t = ev.terms

        def raw(name):
            return t.get(name, 0.0) / lam[name] if lam[name] > 0 else 0.0

        J_eta = t.get("eta", 0.0) / lam["eta"] if lam["eta"] > 0 else 0.0
        return CostBreakdown(
            J_track=t.get("track", 0.0),
            J_terminal=t.get("terminal", 0.0),
            J_control=t.get("control", 0.0),
            J_Treg=t.get("Treg", 0.0),
            J_eps=raw("eps") if "eps" in t else 0.0,
            J_1hot=raw("onehot") if "onehot" in t else 0.0,
            J_eta=J_eta,
            J_bin=raw("bin") if "bin" in t else 0.0,
            lambdas=lam,
        )

    def violations(self, x) -> dict[str, float]:
        x = np.asarray(x, dtype=float)
        ev = self.evaluate(x)
        return {
            "max_eq_violation": float(np.max(np.abs(ev.eq))) if ev.eq.size else 0.0,
            "max_ineq_violation": float(max(0.0, np.max(ev.ineq))) if ev.ineq.size else 0.0,
            "max_bound_violation": float(max(0.0, np.max(self.lb - x), np.max(x - self.ub))),
        }

    # ---- solution extraction -------------------------------------------------
    def solution(self, x, status: str = "Unsolved", wrap_threshold: float = 0.5) -> Solution:
        spec, geom, sm = self.spec, self.spec.geom, self.spec.smoothing
        parts = self.layout.unpack(x)
        Z = parts["z"]
        zk = State.from_array(Z[:-1])
        T = parts["T"]
        sigma = np.asarray(gate_sigma(zk, geom, sm))
        rho = np.asarray(selector_rho(zk, geom, sm))
        L0, M_len = geom.L0, spec.bigM.length(geom.L0)
        v = self.variant
        if v in (Variant.REF, Variant.FMR):
            delta = parts["delta"] if v is Variant.FMR else self.schedule.copy()
            names = ("d", "u", "l")
            lengths = np.stack(
                [
                    effective_length_direct(zk, geom, sm),
                    effective_length_vertex(zk, geom, "u", sm),
                    effective_length_vertex(zk, geom, "l", sm),
                ],
                axis=1,
            )
            d_eff = np.sum(delta * lengths, axis=1)
            gap = L0 - d_eff
            weights = delta
            wrap = delta[:, 1] + delta[:, 2]
            dtau = torque_diagnostic(zk, geom, {"u": delta[:, 1], "l": delta[:, 2]}, "FMR", sm)
        else:
            names = ("d", "r")
            w_r = parts["dr"] if v is Variant.BMR else 1.0 - sigma
            w_d = 1.0 - w_r
            d_d = effective_length_direct(zk, geom, sm)
            d_r = effective_length_redirected(zk, geom, sm)
            _, _, gap = gated_gaps(d_d, d_r, w_d, w_r, L0, M_len)
            d_eff = w_d * d_d + w_r * d_r
            weights = np.stack([w_d, w_r], axis=1)
            wrap = w_r
            if v is Variant.BMR:
                dtau = torque_diagnostic(zk, geom, w_r, "BMR", sm)
            else:
                dtau = torque_diagnostic(zk, geom, sigma, "IMR", sm)
        comp = (T / spec.params.T_max) * (np.asarray(gap) / L0)
        return Solution(
            variant=v.value,
            dt=spec.params.dt,
            states=Z,
            controls=parts["u"],
            tension=T,
            mode_names=names,
            mode_weights=np.asarray(weights, dtype=float),
            sigma=sigma,
            rho=rho,
            d_eff=np.asarray(d_eff, dtype=float),
            gap=np.asarray(gap, dtype=float),
            comp=np.asarray(comp, dtype=float),
            dtau_eff=np.asarray(dtau, dtype=float) * np.ones(self.N),
            wrap_active=np.asarray(wrap) > wrap_threshold,
            reference=spec.reference.copy(),
            costs=self.breakdown(x).as_dict(),
            violations=self.violations(x),
            status=status,
        )

    # ---- external description ---------------------------------------------------
    def describe(self) -> dict:
        """JSON-ready description of the NLP for out-of-tree solvers."""
        lay = self.layout
        return {
            "schema": "cabletow.nlp/1",
            "variant": self.variant.value,
            "N": self.N,
            "n_vars": lay.n_vars,
            "variables": {
                name: {"offset": sl.start, "shape": list(shape)} for name, (sl, shape) in lay.blocks.items()
            },
            "lower_bounds": _finite_list(self.lb),
            "upper_bounds": _finite_list(self.ub),
            "x_scale": self.x_scale.tolist(),
            "equalities": {
                "count": self.n_eq,
                "per_stage": {k: [s.start, s.stop] for k, s in self.eq_blocks.items()},
                "sense": "== 0",
            },
            "inequalities": {
                "count": self.n_ineq,
                "per_stage": {k: [s.start, s.stop] for k, s in self.ineq_blocks.items()},
                "sense": "<= 0",
            },
            "row_order": "stage-major: row = k * m_block_total + column",
            "stage_local_names": lay.local_names,
            "stage_index": lay.stage_index.tolist(),
            "multipliers": self.multipliers,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.describe(), **kw)


def _finite_list(a):
    return [float(v) if np.isfinite(v) else None for v in a]


def _check_schedule(schedule, N):
    s = np.asarray(schedule, dtype=float)
    if s.shape == (N,):
        s = np.eye(3)[s.astype(int)]
    if s.shape != (N, 3):
        raise ValueError(f"schedule must be (N,) mode indices or (N, 3) one-hot, got {s.shape}")
    if not (np.all((s == 0) | (s == 1)) and np.all(s.sum(axis=1) == 1)):
        raise ValueError("schedule rows must be one-hot")
    return s


def _der(d: ad.Dual, N, nloc):
    return np.broadcast_to(d.der, (N, nloc))


def _block_slices(blocks: dict) -> dict[str, slice]:
    out, off = {}, 0
    for k, rows in blocks.items():
        out[k] = slice(off, off + len(rows))
        off += len(rows)
    return out


def _stack_block(blocks: dict, N, nloc, derivatives):
    rows = [r for v in blocks.values() for r in v]
    if not rows:
        return np.zeros((N, 0)), (np.zeros((N, 0, nloc)) if derivatives else None)
    vals = np.stack([np.broadcast_to(ad.value(r), (N,)) for r in rows], axis=1)
    if not derivatives:
        return vals, None
    ders = np.stack(
        [_der(r, N, nloc) if isinstance(r, ad.Dual) else np.zeros((N, nloc)) for r in rows], axis=1
    )
    return vals, ders


# ---------------------------------------------------------------------------
# builders


def build_reference(spec: OcpSpec, schedule) -> NlpProblem:
    return NlpProblem(spec, Variant.REF, schedule=schedule)


def build_fmr(spec: OcpSpec) -> NlpProblem:
    return NlpProblem(spec, Variant.FMR)


def build_bmr(spec: OcpSpec) -> NlpProblem:
    return NlpProblem(spec, Variant.BMR)


def build_imr(spec: OcpSpec) -> NlpProblem:
    return NlpProblem(spec, Variant.IMR)


BUILDERS = {Variant.FMR: build_fmr, Variant.BMR: build_bmr, Variant.IMR: build_imr}


def build(spec: OcpSpec, variant, schedule=None) -> NlpProblem:
    variant = Variant.parse(variant)
    if variant is Variant.REF:
        return build_reference(spec, schedule)
    return BUILDERS[variant](spec)


def objective_terms(x, problem: NlpProblem) -> CostBreakdown:
    return problem.breakdown(x)


def obstacle_constraints(problem: NlpProblem, x) -> np.ndarray:
    """Obstacle residuals ``(N, 2 * n_obstacles)``: box then gripper per obstacle."""
    if "obstacle" not in problem.ineq_blocks:
        return np.zeros((problem.N, 0))
    return problem.evaluate(x).ineq[:, problem.ineq_blocks["obstacle"]]
