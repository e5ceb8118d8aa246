"""Serialisation of check reports: text, CSV and structured (JSON).

Floats are written with 17 significant digits so every double survives a
round trip. ``elapsed`` is left out unless asked for, which keeps repeated
runs byte-identical.
"""

from __future__ import annotations

import io
import json
import math

import numpy as np

from .verify import CheckReport

FORMATS = ("text", "csv", "structured")


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _scalar(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if v is None:
        return "null"
    return json.dumps(str(v))


def dumps(obj, indent=0) -> str:
    """JSON text with 17-digit floats and insertion-ordered keys."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_scalar(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in seq) + "\n" + end + "]"
    return _scalar(obj)


def report_to_dict(r: CheckReport, timing=False) -> dict:
    d = {
        "name": r.name,
        "passed": bool(r.passed),
        "max_residual": float(r.max_residual),
        "tol": float(r.tol),
        "location": dict(r.location),
        "samples": dict(r.samples),
        "seed": r.seed,
        "details": dict(r.details),
        "columns": list(r.columns),
        "rows": [list(row) for row in r.rows],
        "children": [report_to_dict(c, timing) for c in r.children],
    }
    if timing:
        d["elapsed"] = float(r.elapsed)
    return d


def report_from_dict(d: dict) -> CheckReport:
    return CheckReport(
        name=d["name"],
        passed=d["passed"],
        max_residual=d["max_residual"],
        tol=d["tol"],
        location=d.get("location", {}),
        samples=d.get("samples", {}),
        seed=d.get("seed"),
        details=d.get("details", {}),
        columns=d.get("columns", []),
        rows=d.get("rows", []),
        children=[report_from_dict(c) for c in d.get("children", [])],
        elapsed=d.get("elapsed", 0.0),
    )


def parse_structured(data: bytes | str) -> CheckReport:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return report_from_dict(json.loads(data))


def _kv(d: dict) -> str:
    return " ".join(f"{k}={_scalar(v) if not isinstance(v, str) else v}" for k, v in d.items())


def _text(r: CheckReport, depth: int, timing: bool, out: list):
    pad = "  " * depth
    out.append(f"{pad}{'PASS' if r.passed else 'FAIL'} {r.name}: max residual {fmt_float(r.max_residual)} (tol {fmt_float(r.tol)})")
    if r.location:
        out.append(f"{pad}  at {_kv(r.location)}")
    if r.samples:
        out.append(f"{pad}  samples {_kv(r.samples)}")
    if r.seed is not None:
        out.append(f"{pad}  seed {r.seed}")
    if r.details:
        out.append(f"{pad}  {_kv(r.details)}")
    if timing:
        out.append(f"{pad}  elapsed {r.elapsed:.3f} s")
    for c in r.children:
        _text(c, depth + 1, timing, out)


def _csv_rows(r: CheckReport):
    if r.rows:
        return list(r.columns), [list(row) for row in r.rows]
    if r.children and all(c.rows and c.columns == r.children[0].columns for c in r.children):
        cols = ["check"] + list(r.children[0].columns)
        return cols, [[c.name] + list(row) for c in r.children for row in c.rows]
    cols = ["check", "passed", "max_residual", "tol"]
    subjects = r.children or [r]
    return cols, [[c.name, c.passed, c.max_residual, c.tol] for c in subjects]


def write_csv(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else _scalar(v) for v in row) + "\n")
    return buf.getvalue()


def emit_report(report: CheckReport, fmt: str = "text", timing: bool = False) -> bytes:
    if fmt == "text":
        lines: list[str] = []
        _text(report, 0, timing, lines)
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt == "csv":
        return write_csv(*_csv_rows(report)).encode("utf-8")
    if fmt == "structured":
        return (dumps(report_to_dict(report, timing)) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
