"""Bundled NLP solver: augmented Lagrangian outer loop, projected quasi-Newton inner loop.

The inner model Hessian is the penalty curvature ``rho J^T J`` of the
equality and active inequality constraints plus either the Gauss-Newton part
of the objective (``hessian="gn"``) or the full Lagrangian curvature
(``hessian="exact"``), the latter from forward differences of the AD stage
gradients.  A Levenberg-Marquardt shift restores positive definiteness.
Because every residual is stage local the Hessian is block banded once
variables are ordered by stage, so each step is a banded Cholesky solve.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, cholesky_banded, cho_solve_banded

from . import ad
from .geometry import STATE_DIM
from .ocp import Evaluation, NlpProblem, Variant

log = logging.getLogger(__name__)

STATUSES = ("Converged", "MaxIter", "Infeasible", "Diverged")


@dataclass(frozen=True)
class SolverConfig:
    max_outer: int = 30
    max_inner: int = 150
    tol_kkt: float = 1e-4
    tol_feas: float = 1e-6
    tol_comp: float = 1e-4
    penalty_init: float = 100.0
    penalty_growth: float = 10.0
    penalty_max: float = 1e8
    penalty_feas: float = 1e-3
    stages: tuple[float, ...] = (1.0, 10.0, 100.0)
    lm_init: float = 1e-4
    hessian: str = "gn"
    # NCR allowance per stage; None keeps the problem's own value
    eta_continuation: tuple[float | None, ...] = (1e-2, 1e-3, None)
    seed: int = 0

    def __post_init__(self):
        if min(self.tol_kkt, self.tol_feas, self.tol_comp) <= 0:
            raise ValueError("tolerances must be positive")
        if self.penalty_growth <= 1:
            raise ValueError("penalty_growth must exceed 1")
        if not self.stages:
            raise ValueError("need at least one homotopy stage")
        if self.eta_continuation and len(self.eta_continuation) != len(self.stages):
            raise ValueError("eta_continuation must match stages in length")
        if self.hessian not in ("exact", "gn"):
            raise ValueError("hessian must be 'exact' or 'gn'")


@dataclass
class StageRecord:
    multiplier: float
    outer_iterations: int
    inner_iterations: int
    objective: float
    max_eq_violation: float
    max_ineq_violation: float
    max_comp_product: float
    kkt_residual: float
    penalty: float


@dataclass
class SolveReport:
    status: str
    kkt_residual: float
    max_eq_violation: float
    max_ineq_violation: float
    max_comp_product: float
    objective: float
    wall_time: float
    outer_iterations: int
    inner_iterations: int
    history: list[StageRecord] = field(default_factory=list)
    message: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class InitialGuess:
    x: np.ndarray
    seed: int | None = None


# ---------------------------------------------------------------------------
# derivatives


class NonFiniteDerivative(FloatingPointError):
    def __init__(self, index: int, what: str):
        super().__init__(f"non-finite {what} derivative at variable index {index}")
        self.index = index


def differentiate(problem: NlpProblem, point: np.ndarray, mode: str = "ad", h: float = 1e-6):
    """Objective gradient and sparse constraint Jacobians at ``point``.

    ``mode="ad"`` propagates dual numbers through the model; ``mode="fd"``
    uses central differences with relative step ``h`` (dense, for checking).
    Returns ``(grad, J_eq, J_ineq)``.
    """
    x = np.clip(np.asarray(point, dtype=float), problem.lb, problem.ub)
    lay = problem.layout
    if mode == "ad":
        ev = problem.evaluate(x, derivatives=True)
        grad = lay.scatter_vector(ev.grad_loc)
        J_eq = lay.jacobian_matrix(ev.eq_der)
        J_in = lay.jacobian_matrix(ev.ineq_der)
        for what, arr in (("objective", grad), ("equality", J_eq.data), ("inequality", J_in.data)):
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                col = bad[0] if what == "objective" else _column_of(J_eq if what == "equality" else J_in, bad[0])
                raise NonFiniteDerivative(int(col), what)
        return grad, J_eq, J_in
    if mode == "fd":
        import scipy.sparse as sp

        n = x.size
        grad = np.zeros(n)
        J_eq = np.zeros((problem.n_eq, n))
        J_in = np.zeros((problem.n_ineq, n))
        for j in range(n):
            step = h * max(1.0, abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += step
            xm[j] -= step
            ep, em = problem.evaluate(xp), problem.evaluate(xm)
            grad[j] = (ep.f - em.f) / (2 * step)
            J_eq[:, j] = (ep.eq.ravel() - em.eq.ravel()) / (2 * step)
            J_in[:, j] = (ep.ineq.ravel() - em.ineq.ravel()) / (2 * step)
        return grad, sp.csr_matrix(J_eq), sp.csr_matrix(J_in)
    raise ValueError(f"unknown differentiation mode {mode!r}")


def _column_of(mat, data_pos):
    return mat.indices[data_pos]


# ---------------------------------------------------------------------------
# banded storage


class _Banded:
    """Stage ordering of variables and scatter of stage blocks into banded form."""

    def __init__(self, problem: NlpProblem):
        lay = problem.layout
        idx = lay.stage_index
        n = lay.n_vars
        order = []
        seen = np.zeros(n, dtype=bool)
        for k in range(idx.shape[0]):
            for j in idx[k]:
                if not seen[j]:
                    seen[j] = True
                    order.append(j)
        order.extend(np.flatnonzero(~seen))  # variables no stage touches
        order = np.asarray(order)
        self.pos = np.empty(n, dtype=int)
        self.pos[order] = np.arange(n)
        p = self.pos[idx]  # (N, nloc) positions
        pi = np.broadcast_to(p[:, :, None], (idx.shape[0], idx.shape[1], idx.shape[1]))
        pj = np.broadcast_to(p[:, None, :], pi.shape)
        lower = pi >= pj
        self.mask = lower
        self.bw = int(np.max(pi - pj))
        self.n = n
        self.flat = ((pi - pj) * n + pj)[lower]

    def assemble(self, blocks: np.ndarray) -> np.ndarray:
        ab = np.bincount(self.flat, weights=blocks[self.mask], minlength=(self.bw + 1) * self.n)
        return ab.reshape(self.bw + 1, self.n)


# ---------------------------------------------------------------------------
# augmented Lagrangian


class _AugLag:
    def __init__(self, problem: NlpProblem, hessian: str = "exact"):
        self.p = problem
        self.hessian = hessian
        self.s = problem.x_scale
        self.lb = problem.lb / self.s
        self.ub = problem.ub / self.s
        self.fixed = problem.lb == problem.ub
        self.band = _Banded(problem)
        self.s_loc = self.s[problem.layout.stage_index]
        self.n_evals = 0

    def x(self, xs):
        return xs * self.s

    def value(self, xs, lam, mu, rho):
        ev = self.p.evaluate(self.x(xs))
        self.n_evals += 1
        return self._merit(ev, lam, mu, rho), ev

    @staticmethod
    def _merit(ev, lam, mu, rho):
        c = ev.eq.ravel()
        h = ev.ineq.ravel()
        hp = np.maximum(0.0, mu + rho * h)
        return ev.f + lam @ c + 0.5 * rho * (c @ c) + (hp @ hp - mu @ mu) / (2.0 * rho)

    @staticmethod
    def _lag_grad(ev, ceff, heff):
        return ev.grad_loc + np.einsum("km,kmj->kj", ceff, ev.eq_der) + np.einsum("km,kmj->kj", heff, ev.ineq_der)

    def _curvature(self, Y, g0, ceff, heff):
        """Stage blocks of the Lagrangian Hessian at fixed multipliers, by forward differences."""
        N, nloc = Y.shape
        H = np.empty((N, nloc, nloc))
        step = 1e-7 * self.s_loc * np.maximum(1.0, np.abs(Y) / self.s_loc)
        for j in range(nloc):
            Yj = Y.copy()
            Yj[:, j] += step[:, j]
            ev = self.p.evaluate_local(Yj, derivatives=True)
            H[:, :, j] = (self._lag_grad(ev, ceff, heff) - g0) / step[:, j, None]
        return 0.5 * (H + H.transpose(0, 2, 1))

    def model(self, xs, lam, mu, rho):
        """Merit value, scaled gradient and banded model Hessian."""
        p = self.p
        Y = p.layout.local(self.x(xs))
        ev = p.evaluate_local(Y, derivatives=True)
        self.n_evals += 1
        c = ev.eq
        h = ev.ineq
        lam2 = lam.reshape(c.shape)
        mu2 = mu.reshape(h.shape)
        ceff = lam2 + rho * c
        heff = np.maximum(0.0, mu2 + rho * h)
        g_loc = self._lag_grad(ev, ceff, heff)
        act = (heff > 0).astype(float)
        if self.hessian == "exact":
            Hb = self._curvature(Y, g_loc, lam2 + rho * c, heff)
        else:
            Hb = ev.hess_loc.copy()
        Hb += rho * np.einsum("kmi,kmj->kij", ev.eq_der, ev.eq_der)
        Hb += rho * np.einsum("kmi,kmj->kij", ev.ineq_der * act[:, :, None], ev.ineq_der)
        s = self.s_loc
        g_loc = g_loc * s
        Hb = Hb * s[:, :, None] * s[:, None, :]
        grad = p.layout.scatter_vector(g_loc)
        return self._merit(ev, lam, mu, rho), grad, self.band.assemble(Hb), ev

    def proj(self, xs):
        return np.clip(xs, self.lb, self.ub)

    def minimize(self, xs, lam, mu, rho, tol, max_iter, lm):
        """Projected Levenberg-Marquardt/Gauss-Newton on the merit function."""
        band = self.band
        it = 0
        L, grad, ab, ev = self.model(xs, lam, mu, rho)
        pg = np.inf
        for it in range(1, max_iter + 1):
            if not np.isfinite(L) or not np.all(np.isfinite(grad)):
                raise FloatingPointError("non-finite merit or gradient")
            pg = np.max(np.abs(xs - self.proj(xs - grad)))
            if pg <= tol:
                break
            # variables on a bound and pushed outward are held fixed
            at_lb = xs <= self.lb + 1e-10 * (1.0 + np.abs(self.lb))
            at_ub = xs >= self.ub - 1e-10 * (1.0 + np.abs(self.ub))
            active = self.fixed | (at_lb & (grad > 0)) | (at_ub & (grad < 0))
            free = ~active
            accepted = False
            for _ in range(12):
                A = ab.copy()
                P = band.pos
                # zero the rows/columns of active variables; unit diagonal keeps it SPD
                act_pos = P[active]
                if act_pos.size:
                    keep = np.ones(band.n)
                    keep[act_pos] = 0.0
                    for r in range(band.bw + 1):
                        A[r, : band.n - r] *= keep[: band.n - r] * keep[r:]
                diag = A[0].copy()
                A[0] = diag + lm * (1.0 + np.abs(diag))
                A[0, act_pos] = 1.0
                rhs = np.zeros(band.n)
                rhs[P[free]] = -grad[free]
                try:
                    cb = cholesky_banded(A, lower=True)
                    dpos = cho_solve_banded((cb, True), rhs)
                except (LinAlgError, ValueError):
                    lm = max(lm * 10.0, 1e-8)
                    continue
                d = dpos[P]
                d[active] = 0.0
                alpha = 1.0
                for _ls in range(20):
                    x_new = self.proj(xs + alpha * d)
                    dx = x_new - xs
                    slope = grad @ dx
                    if slope >= 0:
                        break
                    L_new, _ = self.value(x_new, lam, mu, rho)
                    if np.isfinite(L_new) and L_new <= L + 1e-4 * slope:
                        accepted = True
                        break
                    alpha *= 0.5
                if accepted:
                    break
                lm = max(lm * 10.0, 1e-8)
            if not accepted:
                # projected-gradient fallback keeps progress when the model is poor
                alpha = 1.0 / max(1.0, np.max(np.abs(grad)))
                for _ls in range(40):
                    x_new = self.proj(xs - alpha * grad)
                    L_new, _ = self.value(x_new, lam, mu, rho)
                    if L_new <= L + 1e-4 * (grad @ (x_new - xs)):
                        accepted = True
                        break
                    alpha *= 0.5
                if not accepted:
                    break
            if log.isEnabledFor(5):
                log.log(5, "  it %d L %.8g pg %.2e alpha %.2e lm %.1e nact %d", it, L, pg, alpha, lm, int(active.sum()))
            lm = max(lm / 3.0, 1e-10) if alpha == 1.0 else min(lm * 2.0, 1e6)
            xs = x_new
            L, grad, ab, ev = self.model(xs, lam, mu, rho)
        return xs, it, pg, lm, ev


def _comp_max(problem, x) -> float:
    if not hasattr(problem, "solution"):
        return 0.0
    sol = problem.solution(x)
    return float(np.max(np.abs(sol.comp))) if sol.comp.size else 0.0


def kkt_residual(problem: NlpProblem, x, lam, mu) -> float:
    """Scaled projected-gradient norm of the Lagrangian."""
    grad, J_eq, J_in = differentiate(problem, x)
    gl = grad + J_eq.T @ lam + J_in.T @ mu
    s = problem.x_scale
    xs, g = x / s, gl * s
    pg = xs - np.clip(xs - g, problem.lb / s, problem.ub / s)
    return float(np.max(np.abs(pg)) / max(1.0, np.max(np.abs(grad * s))))


def _stage_problem(problem, mult: float, eps_eta: float | None):
    if not isinstance(problem, NlpProblem):
        return problem
    mults = {k: mult for k in ("eps", "eta", "bin", "onehot")}
    spec = problem.spec
    if eps_eta is not None and eps_eta != spec.comp.eps_eta:
        spec = spec.with_(comp=replace(spec.comp, eps_eta=eps_eta))
    return NlpProblem(spec, problem.variant, problem.schedule, {**problem.multipliers, **mults})


def solve(problem: NlpProblem, config: SolverConfig | None = None, init: InitialGuess | np.ndarray | None = None):
    """Solve ``problem`` through the homotopy stages; returns ``(x, SolveReport)``."""
    config = config or SolverConfig()
    t0 = time.perf_counter()
    if init is None:
        init = default_init(problem) if isinstance(problem, NlpProblem) else np.zeros(problem.n_vars)
    x0 = init.x if isinstance(init, InitialGuess) else np.asarray(init, dtype=float)
    if x0.shape != (problem.n_vars,):
        raise ValueError(f"initial guess has shape {x0.shape}, expected ({problem.n_vars},)")
    x = np.clip(x0, problem.lb, problem.ub)
    history: list[StageRecord] = []
    lam = np.zeros(problem.n_eq)
    mu = np.zeros(problem.n_ineq)
    rho = config.penalty_init
    total_outer = total_inner = 0
    status, message = "MaxIter", ""
    stage_problem = problem
    lm = config.lm_init
    for i, mult in enumerate(config.stages):
        stage_problem = _stage_problem(problem, mult, config.eta_continuation[i] if config.eta_continuation else None)
        al = _AugLag(stage_problem, config.hessian)
        xs = al.proj(x / al.s)
        omega = 1e-2
        prev_v = np.inf
        n_outer = n_inner = 0
        try:
            for n_outer in range(1, config.max_outer + 1):
                xs, it, pg, lm, ev = al.minimize(xs, lam, mu, rho, omega, config.max_inner, lm)
                n_inner += it
                c = ev.eq.ravel()
                h = ev.ineq.ravel()
                feas = max(np.max(np.abs(c), initial=0.0), np.max(h, initial=0.0))
                v = max(np.max(np.abs(c), initial=0.0), np.max(np.abs(np.maximum(h, -mu / rho)), initial=0.0))
                log.debug("stage %g outer %d: inner %d pg %.2e feas %.2e rho %.1e f %.6g",
                          mult, n_outer, it, pg, feas, rho, ev.f)
                lam = lam + rho * c
                mu = np.maximum(0.0, mu + rho * h)
                if feas <= config.tol_feas and pg <= max(omega, config.tol_kkt) and omega <= config.tol_kkt:
                    break
                # raise the penalty when feasibility stalls, unless the subproblem was left
                # unfinished close to feasibility (ill-conditioning would only get worse)
                stalled = v > 0.25 * prev_v and feas > config.tol_feas
                if stalled and (pg <= omega or feas > config.penalty_feas):
                    rho = min(rho * config.penalty_growth, config.penalty_max)
                prev_v = v
                omega = max(config.tol_kkt, 0.1 * omega)
        except FloatingPointError as exc:
            status, message = "Diverged", str(exc)
            x = al.x(xs)
            break
        x = al.x(xs)
        total_outer += n_outer
        total_inner += n_inner
        viol = stage_problem.violations(x)
        history.append(
            StageRecord(
                multiplier=mult,
                outer_iterations=n_outer,
                inner_iterations=n_inner,
                objective=stage_problem.objective(x),
                max_eq_violation=viol["max_eq_violation"],
                max_ineq_violation=viol["max_ineq_violation"],
                max_comp_product=_comp_max(stage_problem, x),
                kkt_residual=kkt_residual(stage_problem, x, lam, mu),
                penalty=rho,
            )
        )

    # exact bounds regardless of what the inner loop did
    x = np.clip(x, problem.lb, problem.ub)
    viol = stage_problem.violations(x)
    kkt = kkt_residual(stage_problem, x, lam, mu) if status != "Diverged" else float("nan")
    comp = _comp_max(stage_problem, x)
    if status != "Diverged":
        if not np.all(np.isfinite(x)):
            status, message = "Diverged", "non-finite iterate"
        else:
            feasible = viol["max_eq_violation"] <= config.tol_feas and viol["max_ineq_violation"] <= config.tol_feas
            if feasible and kkt <= config.tol_kkt and comp <= config.tol_comp:
                status = "Converged"
            elif not feasible and rho >= config.penalty_max:
                status, message = "Infeasible", "penalty limit reached without feasibility"
            else:
                status = "MaxIter"
                message = (f"feas=({viol['max_eq_violation']:.2e}, {viol['max_ineq_violation']:.2e}) "
                           f"kkt={kkt:.2e} comp={comp:.2e}")
    report = SolveReport(
        status=status,
        kkt_residual=kkt,
        max_eq_violation=viol["max_eq_violation"],
        max_ineq_violation=viol["max_ineq_violation"],
        max_comp_product=comp,
        objective=stage_problem.objective(x),
        wall_time=time.perf_counter() - t0,
        outer_iterations=total_outer,
        inner_iterations=total_inner,
        history=history,
        message=message,
    )
    return x, report


# ---------------------------------------------------------------------------
# generic problems


class _DenseLayout:
    def __init__(self, n: int):
        self.n_vars = n
        self.stage_index = np.arange(n)[None, :]

    def local(self, x):
        return np.asarray(x, dtype=float)[self.stage_index]

    def scatter_vector(self, loc):
        return np.asarray(loc, dtype=float).reshape(self.n_vars)

    def jacobian_matrix(self, der):
        import scipy.sparse as sp

        return sp.csr_matrix(der[0])


class DenseProblem:
    """Small dense NLP ``min f(x)`` s.t. ``eq(x) = 0``, ``ineq(x) <= 0``, ``lb <= x <= ub``.

    The callables receive a list of scalars (floats or duals) and return a
    scalar (``fun``) or a sequence (``eq``, ``ineq``).  It is treated as a
    single stage, so :func:`solve` runs it through the same inner and outer
    loops as the trajectory problems.
    """

    def __init__(self, fun, n: int, eq=None, ineq=None, lb=None, ub=None, x_scale=None):
        self.fun, self._eq, self._in = fun, eq, ineq
        self.layout = _DenseLayout(n)
        self.N = 1
        # large finite defaults keep the bound arithmetic free of inf - inf
        self.lb = np.full(n, -1e20) if lb is None else np.asarray(lb, dtype=float)
        self.ub = np.full(n, 1e20) if ub is None else np.asarray(ub, dtype=float)
        self.x_scale = np.ones(n) if x_scale is None else np.asarray(x_scale, dtype=float)
        probe = self.evaluate(np.clip(np.zeros(n), self.lb, self.ub))
        self.n_eq, self.n_ineq = probe.eq.size, probe.ineq.size

    @property
    def n_vars(self) -> int:
        return self.layout.n_vars

    def _rows(self, fn, args):
        return [] if fn is None else list(fn(args))

    def evaluate_local(self, Y, derivatives: bool = False) -> Evaluation:
        y = np.asarray(Y, dtype=float)[0]
        n = y.size
        if not derivatives:
            args = list(y)
            f = float(self.fun(args))
            eq = np.array(self._rows(self._eq, args), dtype=float).reshape(1, -1)
            ineq = np.array(self._rows(self._in, args), dtype=float).reshape(1, -1)
            return Evaluation(f, {"f": f}, eq, ineq)
        f, g = ad.jacobian(lambda a: [self.fun(a)], y)
        _, Je = ad.jacobian(lambda a: self._rows(self._eq, a) or [0.0], y)
        _, Ji = ad.jacobian(lambda a: self._rows(self._in, a) or [0.0], y)
        eq = self.evaluate_local(Y).eq
        ineq = self.evaluate_local(Y).ineq
        H = np.empty((n, n))
        for j in range(n):
            h = 1e-7 * max(1.0, abs(y[j]))
            yp = y.copy()
            yp[j] += h
            H[:, j] = (ad.jacobian(lambda a: [self.fun(a)], yp)[1][0] - g[0]) / h
        H = 0.5 * (H + H.T)
        return Evaluation(
            float(f[0]), {"f": float(f[0])}, eq, ineq, g, Je[None, : eq.shape[1]], Ji[None, : ineq.shape[1]], H[None]
        )

    def evaluate(self, x, derivatives: bool = False) -> Evaluation:
        return self.evaluate_local(self.layout.local(x), derivatives)

    def objective(self, x) -> float:
        return self.evaluate(x).f

    def violations(self, x) -> dict[str, float]:
        x = np.asarray(x, dtype=float)
        ev = self.evaluate(x)
        return {
            "max_eq_violation": float(np.max(np.abs(ev.eq), initial=0.0)),
            "max_ineq_violation": float(max(0.0, np.max(ev.ineq, initial=0.0))),
            "max_bound_violation": float(max(0.0, np.max(self.lb - x), np.max(x - self.ub))),
        }


# ---------------------------------------------------------------------------
# initial guesses


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    v = np.atleast_2d(v)
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, v.shape[1] + 1)
    cond = u - css / k > 0
    r = v.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), r] / (r + 1)
    return np.maximum(v - theta[:, None], 0.0)


def default_init(problem: NlpProblem, seed: int | None = None, r_pert: float = 0.1) -> InitialGuess:
    """Straight-line state guess from ``z0`` to the terminal reference pose.

    With ``seed`` the initial gripper position is perturbed within a disk of
    radius ``r_pert`` and the tension/mode guesses are scaled by U[0.5, 1.5].
    """
    spec = problem.spec
    N = problem.N
    z0 = spec.z0.copy()
    rng = np.random.default_rng(seed) if seed is not None else None
    if rng is not None:
        ang = rng.uniform(0, 2 * np.pi)
        rad = r_pert * np.sqrt(rng.uniform())
        z0[6] += rad * np.cos(ang)
        z0[7] += rad * np.sin(ang)
    goal = spec.reference[-1]
    s = np.linspace(0.0, 1.0, N + 1)[:, None]
    Z = np.tile(z0, (N + 1, 1))
    Z[:, 0:3] = z0[0:3] + s * (goal - z0[0:3])
    Z[:, 6:8] = z0[6:8] + s * (goal[0:2] - z0[0:2])
    dt = spec.params.dt
    Z[:-1, 3:6] = np.diff(Z[:, 0:3], axis=0) / dt
    Z[-1, 3:6] = 0.0
    Z[:-1, 8:10] = np.diff(Z[:, 6:8], axis=0) / dt
    Z[-1, 8:10] = 0.0
    Z[0] = spec.z0  # initial state stays fixed
    T = np.full(N, 0.1)
    parts = {"z": Z, "u": np.zeros((N, 2)), "T": T}
    if problem.variant is Variant.FMR:
        delta = np.tile([1.0, 0.0, 0.0], (N, 1))
        if rng is not None:
            delta = delta * rng.uniform(0.5, 1.5, size=(N, 3)) + rng.uniform(0.0, 0.1, size=(N, 3))
        parts["delta"] = _project_simplex(delta)
    if problem.variant is Variant.BMR:
        dr = np.full(N, 0.1)
        if rng is not None:
            dr = dr * rng.uniform(0.5, 1.5, size=N)
        parts["dr"] = dr
    if rng is not None:
        parts["T"] = T * rng.uniform(0.5, 1.5, size=N)
    if "eps" in problem.layout.blocks:
        parts["eps"] = np.zeros(N)
        x = problem.layout.pack(parts)
        sol = problem.solution(np.clip(x, problem.lb, problem.ub))
        parts["eps"] = np.maximum(sol.comp, 0.0)
    x = np.clip(problem.layout.pack(parts), problem.lb, problem.ub)
    return InitialGuess(x, seed)


__all__ = [
    "SolverConfig",
    "SolveReport",
    "InitialGuess",
    "DenseProblem",
    "differentiate",
    "solve",
    "default_init",
    "kkt_residual",
    "STATE_DIM",
]
