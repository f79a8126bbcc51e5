"""Metrics, randomized-initialization benchmarks and parameter sweeps."""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import PhysicalParams
from .geometry import BodyGeometry, SmoothingParams
from .ocp import BigM, Bounds, CostWeights, Obstacle, OcpSpec, Variant, build
from .plant import RolloutRecord
from .scenes import SceneConfig, make_scene
from .solver import SolverConfig, default_init, solve
from .tables import BENCH_SCHEMA, SWEEP_SCHEMA, write_table
from .tensioning import ComplementarityParams

# override sections and the dataclass each one configures
SECTIONS = {
    "params": PhysicalParams,
    "geom": BodyGeometry,
    "smoothing": SmoothingParams,
    "comp": ComplementarityParams,
    "weights": CostWeights,
    "bigM": BigM,
    "bounds": Bounds,
    "solver": SolverConfig,
}
TOP_LEVEL = {"wedge_normal", "grip_radius", "standoff", "wrap_threshold", "plant"}


def _make(cls, values: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ValueError(f"unknown keys in {where!r}: {sorted(unknown)}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    return cls(**kw)


def check_overrides(overrides: dict) -> None:
    unknown = set(overrides) - set(SECTIONS) - TOP_LEVEL
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    for sec, cls in SECTIONS.items():
        if sec in overrides:
            if not isinstance(overrides[sec], dict):
                raise ValueError(f"section {sec!r} must be an object")
            _make(cls, overrides[sec], sec)
    if "plant" in overrides:
        from .plant import PlantConfig

        _make(PlantConfig, overrides["plant"], "plant")


def build_spec(scene: SceneConfig, overrides: dict | None = None, params: PhysicalParams | None = None) -> OcpSpec:
    """OcpSpec for ``scene`` with ``overrides`` merged over the scene's own overrides."""
    ov = _merge(scene.overrides, overrides or {})
    check_overrides(ov)
    prm = params or _make(PhysicalParams, {"dt": scene.dt, **ov.get("params", {})}, "params")
    if prm.dt != scene.dt:
        raise ValueError(f"params.dt={prm.dt} differs from scene dt={scene.dt}")
    kw = {sec: _make(cls, ov.get(sec, {}), sec) for sec, cls in SECTIONS.items() if sec not in ("params", "solver")}
    if "geom" not in ov:
        kw["geom"] = BodyGeometry.square()
    return OcpSpec(
        reference=scene.reference,
        z0=scene.initial_state,
        params=prm,
        obstacles=tuple(Obstacle(tuple(o["center"]), float(o["radius"])) for o in scene.obstacles),
        wedge_normal=ov.get("wedge_normal", "behind"),
        grip_radius=float(ov.get("grip_radius", 0.05)),
        standoff=float(ov.get("standoff", 0.2)),
        name=scene.name,
        **kw,
    )


def solver_config(scene: SceneConfig, overrides: dict | None = None) -> SolverConfig:
    ov = _merge(scene.overrides, overrides or {})
    return _make(SolverConfig, ov.get("solver", {}), "solver")


def _merge(a: dict, b: dict) -> dict:
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in a.items()}
    for k, v in b.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# metrics


@dataclass
class Metrics:
    rmse: float
    final_err: float
    wrap_ratio: float
    success: bool
    solve_time: float = math.nan
    comp_max: float = math.nan
    status: str = ""
    steps: int = 0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _trajectory(obj):
    if isinstance(obj, RolloutRecord):
        return obj.states, obj.wrap_active, math.nan, obj.status
    states = np.asarray(obj.states)
    wrap = np.asarray(obj.wrap_active, dtype=bool)
    comp = getattr(obj, "comp", None)
    cmax = float(np.max(np.abs(comp))) if comp is not None and len(comp) else math.nan
    return states, wrap, cmax, getattr(obj, "status", "")


def compute_metrics(obj, scene: SceneConfig, solve_time: float = math.nan, policy: dict | None = None) -> Metrics:
    """Box-CoM tracking metrics and the scene's success verdict.

    ``obj`` is a :class:`Solution`, a plan read back from disk or a
    :class:`RolloutRecord`.  Trajectories shorter than the horizon are scored
    on their finite prefix and never succeed.
    """
    states, wrap, cmax, status = _trajectory(obj)
    ref = scene.reference
    N = scene.N
    finite = np.all(np.isfinite(states), axis=1)
    n_ok = int(np.argmin(finite)) if not finite.all() else states.shape[0]
    n_ok = min(n_ok, N + 1)
    complete = n_ok == N + 1
    if n_ok == 0:
        return Metrics(math.nan, math.nan, 0.0, False, solve_time, cmax, status, 0)
    e = np.hypot(states[:n_ok, 0] - ref[:n_ok, 0], states[:n_ok, 1] - ref[:n_ok, 1])
    rmse = float(np.sqrt(np.mean(e * e)))
    final = float(e[-1])
    w = wrap[: max(n_ok - 1, 0)]
    wrap_ratio = float(np.sum(w) / N) if N else 0.0
    pol = dict(scene.policy)
    pol.update(policy or {})
    ok = complete and rmse <= pol.get("rmse_max", math.inf) and final <= pol.get("final_err_max", math.inf)
    if pol.get("wrap_min") is not None:
        ok = ok and wrap_ratio >= pol["wrap_min"]
    if pol.get("require_converged"):
        ok = ok and status in ("Converged", "Completed")
    if status in ("Diverged", "Infeasible"):
        ok = False
    return Metrics(rmse, final, wrap_ratio, bool(ok), solve_time, cmax, status, n_ok - 1)


# ---------------------------------------------------------------------------
# solving


@dataclass
class SolveResult:
    solution: object
    report: object
    metrics: Metrics
    problem: object = field(repr=False, default=None)


def solve_scene(scene: SceneConfig, variant, overrides: dict | None = None, schedule=None,
                init_seed: int | None = None, r_pert: float = 0.0, params: PhysicalParams | None = None,
                config: SolverConfig | None = None) -> SolveResult:
    """Build and solve one NLP for ``scene``; ``init_seed`` randomizes the guess."""
    spec = build_spec(scene, overrides, params)
    problem = build(spec, variant, schedule)
    cfg = config or solver_config(scene, overrides)
    init = default_init(problem, seed=init_seed, r_pert=r_pert) if init_seed is not None else default_init(problem)
    x, report = solve(problem, cfg, init)
    thr = _merge(scene.overrides, overrides or {}).get("wrap_threshold", 0.5)
    sol = problem.solution(x, report.status, wrap_threshold=thr)
    return SolveResult(sol, report, compute_metrics(sol, scene, report.wall_time), problem)


def perturbed_scene(scene: SceneConfig, rng: np.random.Generator, r_pert: float) -> SceneConfig:
    """Copy of ``scene`` with the initial gripper position moved uniformly within a disk."""
    z0 = scene.initial_state.copy()
    ang = rng.uniform(0.0, 2.0 * np.pi)
    rad = r_pert * math.sqrt(rng.uniform())
    z0[6] += rad * math.cos(ang)
    z0[7] += rad * math.sin(ang)
    return dataclasses.replace(scene, initial_state=z0)


def trial_seeds(seed: int, trials: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(trials)]


BENCH_COLUMNS = ("trial", "seed", "scene", "variant", "status", "success", "rmse", "final_err", "wrap_ratio",
                 "comp_max", "objective", "kkt_residual", "outer_iterations", "inner_iterations", "gx0", "gy0")


def _run_trial(args):
    scene, variant, overrides, trial, seed, r_pert = args
    rng = np.random.default_rng(seed)
    sc = perturbed_scene(scene, rng, r_pert)
    res = solve_scene(sc, variant, overrides, init_seed=int(rng.integers(2**31)), r_pert=r_pert)
    m, rep = res.metrics, res.report
    row = {
        "trial": trial, "seed": seed, "scene": scene.name, "variant": Variant.parse(variant).value,
        "status": rep.status, "success": m.success, "rmse": m.rmse, "final_err": m.final_err,
        "wrap_ratio": m.wrap_ratio, "comp_max": m.comp_max, "objective": rep.objective,
        "kkt_residual": rep.kkt_residual, "outer_iterations": rep.outer_iterations,
        "inner_iterations": rep.inner_iterations, "gx0": float(sc.initial_state[6]), "gy0": float(sc.initial_state[7]),
    }
    return row, rep.wall_time


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(a) for a in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


@dataclass
class BenchmarkResult:
    rows: list[dict]
    times: list[float]
    aggregate: dict

    def csv(self) -> str:
        return write_table(BENCH_COLUMNS, self.rows, BENCH_SCHEMA)

    def timing_csv(self) -> str:
        return write_table(("trial", "solve_time"), list(enumerate(self.times)), BENCH_SCHEMA + "-timing")


def aggregate_rows(rows: list[dict], times: list[float]) -> dict:
    """Benchmark aggregate: success rate (SR), mean/std time, mean RMSE over successes, mean wrap ratio."""
    n = len(rows)
    succ = [r for r in rows if r["success"]]
    t = np.asarray(times, dtype=float)
    return {
        "trials": n,
        "successes": len(succ),
        "SR": len(succ) / n if n else 0.0,
        "time_mean": float(np.mean(t)) if n else math.nan,
        "time_std": float(np.std(t)) if n else math.nan,
        "rmse_mean": float(np.mean([r["rmse"] for r in succ])) if succ else math.nan,
        "wrap_mean": float(np.mean([r["wrap_ratio"] for r in rows])) if n else math.nan,
    }


def run_randomized_benchmark(scene: SceneConfig, variant, trials: int = 15, seed: int = 0, jobs: int = 1,
                             overrides: dict | None = None, r_pert: float = 0.1) -> BenchmarkResult:
    """Random initial gripper pose and solver guess per trial.

    Rows hold only deterministic quantities; wall times are kept apart so the
    per-trial table is reproducible bit for bit.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = trial_seeds(seed, trials)
    out = _map(_run_trial, [(scene, variant, overrides, i, s, r_pert) for i, s in enumerate(seeds)], jobs)
    rows = [r for r, _ in out]
    times = [t for _, t in out]
    return BenchmarkResult(rows, times, aggregate_rows(rows, times))


# ---------------------------------------------------------------------------
# sweeps

SWEEP_COLUMNS = ("mass_mult", "rot_damping_mult", "status", "success", "rmse", "final_err", "wrap_ratio",
                 "first_wrap_step", "mode_trace")
DEFAULT_MASS_GRID = (0.7, 1.0, 1.3)
DEFAULT_ROTD_GRID = (0.5, 1.0, 2.0)


def _sweep_cell(args):
    scene, variant, overrides, mm, rm = args
    spec = build_spec(scene, overrides)
    p = spec.params
    prm = dataclasses.replace(p, box_mass=p.box_mass * mm, box_inertia=p.box_inertia * mm,
                              gravity_load=None if p.gravity_load is None else p.gravity_load * mm,
                              rot_damping=p.rot_damping * rm)
    res = solve_scene(scene, variant, overrides, params=prm)
    trace = res.solution.wrap_active.astype(int)
    first = int(np.argmax(trace)) if trace.any() else -1
    m = res.metrics
    return {
        "mass_mult": mm, "rot_damping_mult": rm, "status": res.report.status, "success": m.success,
        "rmse": m.rmse, "final_err": m.final_err, "wrap_ratio": m.wrap_ratio, "first_wrap_step": first,
        "mode_trace": "".join(map(str, trace.tolist())),
    }


@dataclass
class SweepResult:
    cells: list[dict]

    def csv(self) -> str:
        return write_table(SWEEP_COLUMNS, self.cells, SWEEP_SCHEMA)

    def grid(self, key: str = "rmse") -> np.ndarray:
        ms = sorted({c["mass_mult"] for c in self.cells})
        rs = sorted({c["rot_damping_mult"] for c in self.cells})
        out = np.full((len(ms), len(rs)), np.nan)
        for c in self.cells:
            out[ms.index(c["mass_mult"]), rs.index(c["rot_damping_mult"])] = c[key]
        return out


def run_parameter_sweep(scene: SceneConfig, variant, mass_grid=DEFAULT_MASS_GRID, rot_damping_grid=DEFAULT_ROTD_GRID,
                        jobs: int = 1, overrides: dict | None = None) -> SweepResult:
    """One nominal-init solve per (mass, rotational damping) multiplier pair."""
    if not len(mass_grid) or not len(rot_damping_grid):
        raise ValueError("sweep grid must be nonempty")
    items = [(scene, variant, overrides, float(m), float(r)) for m in mass_grid for r in rot_damping_grid]
    return SweepResult(_map(_sweep_cell, items, jobs))


__all__ = [
    "Metrics", "compute_metrics", "make_scene", "solve_scene", "run_randomized_benchmark",
    "run_parameter_sweep", "build_spec", "BenchmarkResult", "SweepResult",
]
