"""Canonical JSON and CSV output.

Floats are written with 17 significant digits in sorted-key order, and nothing
time-dependent is recorded, so identical runs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from .regularity import SCHEMA_VERSION


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = "%.17g" % x
    # Keep floats recognizable as floats when they happen to be integral.
    return text if any(c in text for c in ".en") else text + ".0"


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _emit(obj, out: list[str], indent: int, level: int) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        # Numeric vectors stay on one line.
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            out.append("[" + ", ".join(str(v) if isinstance(v, int) else _float(v)
                                       for v in obj) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, key in enumerate(keys):
            out.append(pad + json.dumps(key, ensure_ascii=False) + ": ")
            _emit(obj[key], out, indent, level + 1)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(end + "}")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_canonical(obj, indent: int = 1) -> str:
    out: list[str] = []
    _emit(_plain(obj), out, indent, 0)
    return "".join(out) + "\n"


# ---------------------------------------------------------------------------
# Schemas

_NUM = {"type": ["number", "null"]}
_VEC = {"type": "array", "items": {"type": "number"}}

_SAMPLE = {
    "type": "object",
    "required": ["x", "f_x", "margin_radial", "margin_vertical", "branch"],
    "properties": {
        "x": _VEC, "f_x": _VEC, "margin_radial": _NUM, "margin_vertical": _NUM,
        "branch": {"enum": ["RadialLift", "VerticalAdjust", "NotSuitable", "Transverse", "Error"]},
        "submersion_sv": {"type": "number"},
    },
}

_COMMON = {
    "version": {"const": SCHEMA_VERSION},
    "seed": {"type": "integer", "minimum": 0},
}

SCHEMAS = {
    "regularity": {
        "type": "object",
        "required": ["germ", "kind", "epsilon", "delta", "alpha", "eta", "tolerance_profile",
                     "samples", "pass", "failures", "seed", "version"],
        "properties": {
            **_COMMON,
            "germ": {"type": "string"},
            "kind": {"enum": ["transversality-property", "d-regular", "d_h-regular"]},
            "epsilon": {"type": "number", "exclusiveMinimum": 0},
            "delta": _NUM, "eta": _NUM,
            "alpha": {"type": ["array", "null"], "items": {"type": "number"}},
            "tolerance_profile": {"type": "object"},
            "samples": {"type": "array", "items": _SAMPLE},
            "pass": {"type": "boolean"},
            "failures": {"type": "integer", "minimum": 0},
        },
    },
    "omega": {
        "type": "object",
        "required": ["germ", "omega", "found", "epsilon", "delta", "alphas_tested",
                     "points_tested", "failure_witnesses", "candidates", "seed", "version"],
        "properties": {
            **_COMMON,
            "omega": {"type": "number", "minimum": 0, "maximum": 1},
            "found": {"type": "boolean"},
            "failure_witnesses": {"type": "array", "items": {
                "type": "object", "required": ["alpha", "x", "margin_radial", "margin_vertical"]}},
        },
    },
    # Every CLI output envelope records the schema version and the effective config.
    "output": {
        "type": "object",
        "required": ["command", "config", "version"],
        "properties": {"version": {"const": SCHEMA_VERSION}, "command": {"type": "string"},
                       "config": {"type": "object"}},
    },
}


def validate_report(obj, schema: str) -> None:
    jsonschema.validate(_plain(obj), SCHEMAS[schema])


def write_report(obj, path, schema: str | None = None) -> Path:
    """Validate (when a schema name is given) and write canonical JSON."""
    if schema is not None:
        validate_report(obj, schema)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_canonical(obj), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# CSV


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else "%.17g" % v
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows), encoding="utf-8")
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
