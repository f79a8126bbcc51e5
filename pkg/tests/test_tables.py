import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cabletow.tables import (
    SOLUTION_COLUMNS,
    SOLUTION_SCHEMA,
    SchemaError,
    fmt,
    parse_header,
    read_plan,
    read_table,
    solution_csv,
    to_float,
    write_table,
)

from test_ocp import small_spec
from cabletow.ocp import build_imr
from cabletow.solver import default_init


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_roundtrips(v):
    assert float(fmt(v)) == v


def test_fmt_types():
    assert [fmt(None), fmt(True), fmt(np.int64(3)), fmt("x")] == ["", "1", "3", "x"]


def test_write_read_roundtrip():
    text = write_table(("a", "b"), [[1, 0.5], {"a": 2, "b": None}], "demo/1", {"seed": 4})
    head, rows = read_table(text, "demo/1")
    assert head["seed"] == "4" and head["columns"] == ["a", "b"]
    assert rows == [{"a": "1", "b": "0.5"}, {"a": "2", "b": ""}]
    assert math.isnan(to_float(rows[1]["b"]))


@pytest.mark.parametrize("text, where", [("", "empty"), ("a,b\n1,2\n", "line 1"), ("# schema=demo/2\na\n", "line 1"),
                                         ("# schema=demo/1\n", "line 2"), ("# schema=demo/1\na,b\n1\n", "line 3")])
def test_read_rejects(text, where):
    with pytest.raises(SchemaError, match=where):
        read_table(text, "demo/1")


def test_header_token_error():
    with pytest.raises(SchemaError):
        parse_header("# schema=a/1 broken")


def test_to_float_error_location():
    with pytest.raises(SchemaError, match="line 7"):
        to_float("abc", "line 7")


@pytest.fixture(scope="module")
def solution():
    prob = build_imr(small_spec(N=6))
    return prob.solution(default_init(prob).x, "Unsolved")


def test_solution_csv_columns(solution):
    text = solution_csv(solution, {"scene": "t"})
    head, rows = read_table(text, SOLUTION_SCHEMA)
    assert head["columns"] == list(SOLUTION_COLUMNS) and len(rows) == solution.N + 1
    assert head["variant"] == "imr" and head["scene"] == "t"
    assert rows[-1]["T"] == ""


def test_read_plan_roundtrip(solution, tmp_path):
    p = tmp_path / "s.csv"
    p.write_text(solution_csv(solution))
    plan = read_plan(p)
    assert np.array_equal(plan.states, solution.states)
    assert np.array_equal(plan.reference, solution.reference)
    assert np.array_equal(plan.wrap_active, solution.wrap_active)
    assert plan.dt == solution.dt


def test_read_plan_rejects_truncated_row(solution, tmp_path):
    lines = solution_csv(solution).splitlines()
    lines[4] = lines[4].rsplit(",", 3)[0]
    p = tmp_path / "bad.csv"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError, match="line 5"):
        read_plan(p)
