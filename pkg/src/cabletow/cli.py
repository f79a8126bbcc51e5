"""Command-line entry point: ``solve``, ``rollout``, ``bench`` and ``sweep``.

Configuration precedence is CLI flags, then the scene file's own overrides,
then built-in defaults.  Every command writes the merged result to
``config.json`` in its output directory.  Failures are reported on stderr as a
single JSON object; usage and input errors exit with status 2.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (
    BENCH_COLUMNS,
    SECTIONS,
    _merge,
    build_spec,
    check_overrides,
    compute_metrics,
    run_parameter_sweep,
    run_randomized_benchmark,
    solve_scene,
    solver_config,
)
from .ocp import Variant
from .plant import PlantConfig, rollout
from .scenes import SHAPE_DEFAULTS, SceneConfig, load_builtin, make_scene
from .tables import BENCH_SCHEMA, SchemaError, read_plan, solution_csv, write_table

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
VARIANTS = [v.value for v in Variant]
_LABEL_INDEX = {"d": 0, "direct": 0, "u": 1, "wrap-u": 1, "l": 2, "wrap-l": 2}


class UsageError(Exception):
    """Bad flags or unreadable input; exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message)
        sys.exit(EXIT_USAGE)


def _emit_error(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# configuration


def _parse_set(items) -> dict:
    """``section.key=value`` pairs; values are JSON, falling back to plain strings."""
    out: dict = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        path, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        keys = path.split(".")
        if len(keys) > 2 or not all(keys):
            raise UsageError(f"--set key must be 'key' or 'section.key', got {path!r}")
        if len(keys) == 1:
            out[keys[0]] = val
        else:
            out.setdefault(keys[0], {})[keys[1]] = val
    return out


def _cli_overrides(args) -> dict:
    ov: dict = {}
    if getattr(args, "config", None):
        try:
            ov = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(ov, dict):
            raise UsageError("config file must hold a JSON object")
    return _merge(ov, _parse_set(getattr(args, "set", None)))


def _load_scene(args) -> SceneConfig:
    src = args.scene
    if src in SHAPE_DEFAULTS:
        if args.scene_scale is not None:
            return make_scene(src, args.scene_scale)
        return load_builtin(src)
    if args.scene_scale is not None:
        raise UsageError("--scene-scale applies to built-in scene names only")
    try:
        return SceneConfig.load(src)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load scene {src}: {exc}") from None


def _resolved(scene: SceneConfig, overrides: dict) -> dict:
    """Fully expanded configuration: every section with all its field values."""
    ov = _merge(scene.overrides, overrides)
    check_overrides(ov)
    spec = build_spec(scene, overrides)
    out = {sec: dataclasses.asdict(getattr(spec, sec)) for sec in SECTIONS if sec != "solver"}
    out["solver"] = dataclasses.asdict(solver_config(scene, overrides))
    out["plant"] = dataclasses.asdict(PlantConfig(**ov.get("plant", {})))
    out["wedge_normal"] = spec.wedge_normal
    out["grip_radius"] = spec.grip_radius
    out["standoff"] = spec.standoff
    out["wrap_threshold"] = ov.get("wrap_threshold", 0.5)
    return out


def _echo_config(out: Path, command: str, scene: SceneConfig, args, overrides: dict, **extra) -> dict:
    cfg = {
        "command": command,
        "version": __version__,
        "scene": {"source": args.scene, "name": scene.name, "N": scene.N, "dt": scene.dt,
                  "scene_scale": getattr(args, "scene_scale", None)},
        "cli_overrides": overrides,
        "effective": _resolved(scene, overrides),
        **extra,
    }
    _write_json(out / "config.json", cfg)
    return cfg


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _variants(name: str) -> list[str]:
    if name == "all":
        return ["fmr", "bmr", "imr"]
    return [name]


def _read_schedule(path, N: int) -> np.ndarray:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read schedule {path}: {exc}") from None
    modes = raw.get("modes") if isinstance(raw, dict) else raw
    if not isinstance(modes, list) or len(modes) != N:
        raise UsageError(f"schedule must list {N} modes")
    try:
        return np.array([_LABEL_INDEX[m] if isinstance(m, str) else int(m) for m in modes])
    except (KeyError, ValueError, TypeError):
        raise UsageError("schedule entries must be d/u/l, direct/wrap-u/wrap-l or 0/1/2") from None


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    scene = _load_scene(args)
    overrides = _cli_overrides(args)
    variant = Variant.parse(args.variant)
    schedule = None
    if variant is Variant.REF:
        if not args.schedule:
            raise UsageError("variant 'ref' needs --schedule")
        schedule = _read_schedule(args.schedule, scene.N)
    elif args.schedule:
        raise UsageError("--schedule is only valid with --variant ref")
    out = _outdir(args.out)
    _echo_config(out, "solve", scene, args, overrides, variant=variant.value, seed=args.seed,
                 schedule=None if schedule is None else schedule.tolist())
    res = solve_scene(scene, variant, overrides, schedule=schedule, init_seed=args.seed,
                      r_pert=args.r_pert if args.seed is not None else 0.0)
    rep = res.report
    (out / "solution.csv").write_text(solution_csv(res.solution, {"scene": scene.name}), encoding="utf-8")
    report = rep.as_dict()
    report["metrics"] = res.metrics.as_dict()
    report["costs"] = res.solution.costs
    _write_json(out / "report.json", report)
    print(json.dumps({"status": rep.status, "rmse": res.metrics.rmse, "wrap_ratio": res.metrics.wrap_ratio,
                      "out": str(out)}))
    if rep.status != "Converged":
        _emit_error("solver", f"solver finished with status {rep.status}", status=rep.status, detail=rep.message)
        return EXIT_FAIL
    return EXIT_OK


def _scene_from_plan(plan) -> SceneConfig:
    return SceneConfig(name="plan", dt=plan.dt, reference=plan.reference, initial_state=plan.states[0])


def cmd_rollout(args) -> int:
    try:
        plan = read_plan(args.solution)
    except OSError as exc:
        raise UsageError(f"cannot read solution {args.solution}: {exc}") from None
    except SchemaError as exc:
        _emit_error("parse", str(exc), file=str(args.solution))
        return EXIT_USAGE
    scene = _load_scene(args) if args.scene else _scene_from_plan(plan)
    if scene.N != plan.states.shape[0] - 1 or scene.dt != plan.dt:
        raise UsageError(f"solution (N={plan.states.shape[0] - 1}, dt={plan.dt}) does not match scene "
                         f"(N={scene.N}, dt={scene.dt})")
    overrides = _cli_overrides(args)
    ov = _merge(scene.overrides, overrides)
    check_overrides(ov)
    plant_kw = dict(ov.get("plant", {}))
    if args.scale is not None:
        plant_kw["param_scale"] = args.scale
    config = PlantConfig(**plant_kw)
    spec = build_spec(scene, overrides)
    out = _outdir(args.out)
    if args.scene is None:
        args.scene = "<from solution>"
    _echo_config(out, "rollout", scene, args, overrides, solution=str(args.solution), param_scale=config.param_scale)
    rec = rollout(plan, scene, config, spec.params, spec.geom)
    (out / "rollout.csv").write_text(rec.to_csv(), encoding="utf-8")
    m = compute_metrics(rec, scene)
    labels = np.array(rec.labels)
    metrics = {
        **m.as_dict(),
        "param_scale": config.param_scale,
        "scale_overrides": dict(config.scale_overrides),
        "plan_variant": plan.variant,
        "labels": {lab: int(np.sum(labels == lab)) for lab in ("direct", "wrap-u", "wrap-l")},
        "rmse_fraction_of_path": m.rmse / scene.path_length() if scene.path_length() > 0 else None,
    }
    _write_json(out / "metrics.json", metrics)
    print(json.dumps({"status": rec.status, "rmse": m.rmse, "wrap_ratio": m.wrap_ratio, "out": str(out)}))
    return EXIT_OK if rec.status == "Completed" else EXIT_FAIL


def cmd_bench(args) -> int:
    scene = _load_scene(args)
    overrides = _cli_overrides(args)
    out = _outdir(args.out)
    variants = _variants(args.variant)
    if "ref" in variants:
        raise UsageError("bench does not support the fixed-schedule reference")
    _echo_config(out, "bench", scene, args, overrides, variants=variants, trials=args.trials, seed=args.seed,
                 jobs=args.jobs, r_pert=args.r_pert)
    rows, times, summary = [], [], {}
    for v in variants:
        res = run_randomized_benchmark(scene, v, args.trials, args.seed, args.jobs, overrides, args.r_pert)
        rows += res.rows
        times += [{"variant": v, "trial": i, "solve_time": t} for i, t in enumerate(res.times)]
        summary[v] = res.aggregate
    (out / "bench.csv").write_text(write_table(BENCH_COLUMNS, rows, BENCH_SCHEMA, {"scene": scene.name,
                                                                                 "seed": args.seed}),
                                   encoding="utf-8")
    (out / "timing.csv").write_text(write_table(("variant", "trial", "solve_time"), times,
                                                BENCH_SCHEMA + "-timing"), encoding="utf-8")
    _write_json(out / "summary.json", summary)
    print(json.dumps({v: {"SR": s["SR"], "rmse_mean": s["rmse_mean"]} for v, s in summary.items()}))
    return EXIT_OK


def _grid(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"grid must be comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError("grid must be nonempty")
    return vals


def cmd_sweep(args) -> int:
    scene = _load_scene(args)
    overrides = _cli_overrides(args)
    out = _outdir(args.out)
    variants = _variants(args.variant)
    if "ref" in variants:
        raise UsageError("sweep does not support the fixed-schedule reference")
    mg, rg = _grid(args.mass_grid), _grid(args.rot_damping_grid)
    _echo_config(out, "sweep", scene, args, overrides, variants=variants, mass_grid=mg, rot_damping_grid=rg,
                 jobs=args.jobs)
    summary = {}
    for v in variants:
        res = run_parameter_sweep(scene, v, mg, rg, args.jobs, overrides)
        name = "sweep.csv" if len(variants) == 1 else f"sweep_{v}.csv"
        (out / name).write_text(res.csv(), encoding="utf-8")
        summary[v] = {
            "cells": len(res.cells),
            "successes": sum(bool(c["success"]) for c in res.cells),
            "rmse_grid": res.grid("rmse"),
            "wrap_grid": res.grid("wrap_ratio"),
        }
    _write_json(out / "summary.json", summary)
    print(json.dumps({v: {"cells": s["cells"], "successes": s["successes"]} for v, s in summary.items()}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p, scene_required: bool = True):
    p.add_argument("--scene", required=scene_required,
                   help="built-in scene name (zigzag, arc, obstacle) or scene JSON path")
    p.add_argument("--scene-scale", type=float, default=None,
                   help="regenerate a built-in scene at this fraction of full length and horizon")
    p.add_argument("--config", help="JSON file of configuration overrides")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="single override; repeatable")
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cabletow", description="Cable-towed box trajectory optimization.")
    ap.add_argument("--version", action="version", version=f"cabletow {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one scene with one formulation")
    _common(p)
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--schedule", help="JSON mode schedule (ref only)")
    p.add_argument("--seed", type=int, default=None, help="randomize the initial guess with this seed")
    p.add_argument("--r-pert", type=float, default=0.1, help="gripper perturbation radius for --seed")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("rollout", help="replay a solution on the numeric plant")
    _common(p, scene_required=False)
    p.add_argument("--solution", required=True, help="solution.csv written by solve")
    p.add_argument("--scale", type=float, default=None, help="physical parameter scale, e.g. 0.85 or 1.15")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("bench", help="randomized-initialization benchmark")
    _common(p)
    p.add_argument("--variant", default="all", choices=["fmr", "bmr", "imr", "all"])
    p.add_argument("--trials", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--r-pert", type=float, default=0.1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="mass and rotational damping sweep")
    _common(p)
    p.add_argument("--variant", default="imr", choices=["fmr", "bmr", "imr", "all"])
    p.add_argument("--mass-grid", default="0.7,1.0,1.3")
    p.add_argument("--rot-damping-grid", default="0.5,1.0,2.0")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except ValueError as exc:
        # configuration validation (unknown keys, bad values)
        _emit_error("config", str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
