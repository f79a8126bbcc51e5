import json

import pytest

from cabletow.cli import main
from cabletow.tables import BENCH_SCHEMA, SWEEP_SCHEMA, read_table

TINY = ["--scene", "zigzag", "--scene-scale", "0.02", "--set", "solver.max_outer=6", "--set", "solver.max_inner=30"]


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    code = main(["solve", *TINY, "--variant", "imr", "--out", str(out)])
    return code, out


def test_solve_writes_contract(solved):
    code, out = solved
    assert code == 0
    assert {p.name for p in out.iterdir()} == {"solution.csv", "report.json", "config.json"}
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["effective"]["solver"]["max_outer"] == 6 and cfg["scene"]["N"] == 12
    rep = json.loads((out / "report.json").read_text())
    assert rep["status"] == "Converged" and "metrics" in rep


def test_solve_rerun_identical(solved, tmp_path):
    _, out = solved
    assert main(["solve", *TINY, "--variant", "imr", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "solution.csv").read_text() == (out / "solution.csv").read_text()


def test_unknown_variant_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["solve", *TINY, "--variant", "xmr", "--out", str(tmp_path)])
    assert e.value.code == 2 and _err(capsys)["error"] == "usage"


def test_unknown_config_key_exit_2(tmp_path, capsys):
    assert main(["solve", *TINY, "--variant", "imr", "--set", "params.mass=3", "--out", str(tmp_path)]) == 2
    assert _err(capsys)["error"] == "config"


def test_ref_needs_schedule(tmp_path, capsys):
    assert main(["solve", *TINY, "--variant", "ref", "--out", str(tmp_path)]) == 2


def test_ref_with_schedule(tmp_path):
    sched = tmp_path / "s.json"
    sched.write_text(json.dumps({"modes": ["direct"] * 12}))
    assert main(["solve", *TINY, "--variant", "ref", "--schedule", str(sched), "--out", str(tmp_path / "o")]) == 0


def test_solver_failure_exit_1(tmp_path, capsys):
    args = ["solve", *TINY[:4], "--set", "solver.max_outer=1", "--set", "solver.max_inner=1",
            "--variant", "imr", "--out", str(tmp_path)]
    assert main(args) == 1
    err = _err(capsys)
    assert err["error"] == "solver" and err["status"] != "Converged"


@pytest.mark.parametrize("scale", ["1.0", "1.15"])
def test_rollout(solved, tmp_path, scale):
    _, out = solved
    assert main(["rollout", "--solution", str(out / "solution.csv"), "--scale", scale, "--out", str(tmp_path)]) == 0
    csv_lines = (tmp_path / "rollout.csv").read_text().splitlines()
    assert "mode" in csv_lines[1].split(",") and len(csv_lines) == 2 + 12
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert m["param_scale"] == float(scale) and sum(m["labels"].values()) == 12


def test_rollout_corrupt_csv_exit_2(solved, tmp_path, capsys):
    _, out = solved
    lines = (out / "solution.csv").read_text().splitlines()
    lines[5] = "1,2,3"
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["rollout", "--solution", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = _err(capsys)
    assert err["error"] == "parse" and "line 6" in err["message"]


def test_rollout_missing_file_exit_2(tmp_path):
    assert main(["rollout", "--solution", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


def test_bench_all_variants(tmp_path):
    assert main(["bench", *TINY, "--variant", "all", "--trials", "3", "--seed", "1", "--out", str(tmp_path)]) == 0
    _, rows = read_table((tmp_path / "bench.csv").read_text(), BENCH_SCHEMA)
    assert len(rows) == 9 and {r["variant"] for r in rows} == {"fmr", "bmr", "imr"}
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"fmr", "bmr", "imr"} and all("SR" in s for s in summary.values())


def test_sweep_grid(tmp_path):
    assert main(["sweep", *TINY, "--variant", "bmr", "--out", str(tmp_path)]) == 0
    _, rows = read_table((tmp_path / "sweep.csv").read_text(), SWEEP_SCHEMA)
    assert len(rows) == 9 and all(len(r["mode_trace"]) == 12 for r in rows)


def test_bad_grid_exit_2(tmp_path):
    assert main(["sweep", *TINY, "--mass-grid", "a,b", "--out", str(tmp_path)]) == 2


def test_scene_scale_only_for_builtins(tmp_path):
    assert main(["solve", "--scene", str(tmp_path / "x.json"), "--scene-scale", "0.1", "--variant", "imr",
                 "--out", str(tmp_path)]) == 2
