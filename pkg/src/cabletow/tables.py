"""Versioned CSV tables: solutions, benchmark rows, sweep cells.

Every file starts with a ``# schema=<name>/<version> key=value ...`` line.
Readers reject files whose schema differs from the one they expect.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SOLUTION_SCHEMA = "cabletow.solution/1"
BENCH_SCHEMA = "cabletow.bench/1"
SWEEP_SCHEMA = "cabletow.sweep/1"

STATE_COLUMNS = ("px", "py", "theta", "vx", "vy", "omega", "gx", "gy", "gvx", "gvy")
SOLUTION_COLUMNS = ("k", "t", *STATE_COLUMNS, "ref_x", "ref_y", "ref_theta", "track_err", "T", "gap", "d_eff",
                    "comp", "sigma", "rho", "w_redirected", "wrap_active", "dtau_eff", "ux", "uy")


class SchemaError(ValueError):
    """Raised for a missing, unknown or malformed table."""


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _header(schema: str, meta: dict | None) -> str:
    extra = "".join(f" {k}={fmt(v)}" for k, v in (meta or {}).items())
    return f"# schema={schema}{extra}\n"


def write_table(columns, rows, schema: str, meta: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(_header(schema, meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        if isinstance(r, dict):
            r = [r.get(c) for c in columns]
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def parse_header(line: str) -> dict:
    if not line.startswith("# schema="):
        raise SchemaError("line 1: missing '# schema=' header")
    out = {}
    for tok in line[2:].split():
        if "=" not in tok:
            raise SchemaError(f"line 1: malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def read_table(text: str, schema: str) -> tuple[dict, list[dict]]:
    """Parse ``text``; returns ``(header, rows)`` with rows as str-valued dicts."""
    lines = text.splitlines()
    if not lines:
        raise SchemaError("empty file")
    head = parse_header(lines[0])
    if head.get("schema") != schema:
        raise SchemaError(f"line 1: unsupported schema {head.get('schema')!r}; expected {schema!r}")
    reader = csv.reader(lines[1:])
    try:
        columns = next(reader)
    except StopIteration:
        raise SchemaError("line 2: missing column header") from None
    rows = []
    for i, rec in enumerate(reader, start=3):
        if len(rec) != len(columns):
            raise SchemaError(f"line {i}: expected {len(columns)} fields, found {len(rec)}")
        rows.append(dict(zip(columns, rec)))
    head["columns"] = columns
    return head, rows


def to_float(s: str, where: str = "") -> float:
    if s == "":
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise SchemaError(f"{where}: not a number: {s!r}") from None


# ---- solutions --------------------------------------------------------------


def solution_rows(sol) -> list[list]:
    N = sol.N
    ref = sol.reference
    err = np.hypot(sol.states[:, 0] - ref[:, 0], sol.states[:, 1] - ref[:, 1])
    w_r = sol.mode_weights[:, 1:].sum(axis=1)
    rows = []
    for k in range(N + 1):
        row = [k, k * sol.dt, *sol.states[k].tolist(), *ref[k].tolist(), err[k]]
        if k < N:
            row += [sol.tension[k], sol.gap[k], sol.d_eff[k], sol.comp[k], sol.sigma[k], sol.rho[k], w_r[k],
                    bool(sol.wrap_active[k]), sol.dtau_eff[k], sol.controls[k, 0], sol.controls[k, 1]]
        else:
            row += [None] * 11
        rows.append(row)
    return rows


def solution_csv(sol, meta: dict | None = None) -> str:
    m = {"variant": sol.variant, "dt": sol.dt, "N": sol.N, "status": sol.status}
    m.update(meta or {})
    return write_table(SOLUTION_COLUMNS, solution_rows(sol), SOLUTION_SCHEMA, m)


@dataclass
class Plan:
    """Minimal plan read back from a solution table."""

    dt: float
    states: np.ndarray
    reference: np.ndarray
    wrap_active: np.ndarray
    variant: str
    status: str


def read_plan(path) -> Plan:
    text = Path(path).read_text(encoding="utf-8")
    head, rows = read_table(text, SOLUTION_SCHEMA)
    missing = set(SOLUTION_COLUMNS) - set(head["columns"])
    if missing:
        raise SchemaError(f"line 2: missing columns {sorted(missing)}")
    if not rows:
        raise SchemaError("no data rows")
    states = np.array([[to_float(r[c], f"line {i + 3}") for c in STATE_COLUMNS] for i, r in enumerate(rows)])
    ref = np.array([[to_float(r[c], f"line {i + 3}") for c in ("ref_x", "ref_y", "ref_theta")]
                    for i, r in enumerate(rows)])
    if not np.all(np.isfinite(states)):
        raise SchemaError("non-finite state entries")
    wrap = np.array([r["wrap_active"] == "1" for r in rows[:-1]], dtype=bool)
    dt = to_float(head.get("dt", ""), "line 1")
    if not dt > 0:
        raise SchemaError("line 1: missing or invalid dt")
    return Plan(dt, states, ref, wrap, head.get("variant", "?"), head.get("status", "?"))
