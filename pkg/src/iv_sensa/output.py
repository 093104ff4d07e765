"""CSV/JSON rendering of sensitivity curves and bands, written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Optional

from .errors import InvalidParameterError
from .results import CurveRow, SensitivityCurve

CSV = "csv"
JSON = "json"
FORMATS = (CSV, JSON)
HEADER = ("theta", "lower", "upper", "feasible")


def format_number(v: float) -> str:
    """Six significant digits, locale independent."""
    text = format(float(v), ".6g")
    return "0" if text == "-0" else text


def format_theta(theta: float) -> str:
    """Three decimals when that is exact (``0.010``), else six significant digits."""
    fixed = format(float(theta), ".3f")
    if abs(float(fixed) - theta) <= 1e-12:
        return fixed
    return format_number(theta)


def _json_number(v: Optional[float]):
    return None if v is None else float(format_number(v))


def render_curve(curve: SensitivityCurve, fmt: str = CSV) -> str:
    if fmt == CSV:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(HEADER)
        for r in curve.rows:
            writer.writerow([
                format_theta(r.theta),
                format_number(r.lower) if r.feasible else "",
                format_number(r.upper) if r.feasible else "",
                "true" if r.feasible else "false",
            ])
        return buf.getvalue()
    if fmt == JSON:
        rows = [{"theta": _json_number(r.theta), "lower": _json_number(r.lower),
                 "upper": _json_number(r.upper), "feasible": bool(r.feasible)} for r in curve.rows]
        return json.dumps(rows, indent=2) + "\n"
    raise InvalidParameterError(f"unknown output format {fmt!r}; choose from {FORMATS}")


def parse_curve(text: str, fmt: str = CSV) -> SensitivityCurve:
    """Inverse of :func:`render_curve` up to rendering precision."""
    if fmt == CSV:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != HEADER:
            raise InvalidParameterError(f"curve CSV must have header {','.join(HEADER)}")
        rows = []
        for rec in reader:
            feasible = rec["feasible"] == "true"
            rows.append(CurveRow(float(rec["theta"]),
                                 float(rec["lower"]) if feasible else None,
                                 float(rec["upper"]) if feasible else None, feasible))
        return SensitivityCurve(tuple(rows))
    if fmt == JSON:
        return SensitivityCurve(tuple(CurveRow(float(r["theta"]), r["lower"], r["upper"], bool(r["feasible"]))
                                      for r in json.loads(text)))
    raise InvalidParameterError(f"unknown output format {fmt!r}; choose from {FORMATS}")


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    target = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_curve(curve: SensitivityCurve, path, fmt: str = CSV) -> None:
    write_atomic(path, render_curve(curve, fmt))
