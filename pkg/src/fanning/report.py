"""Deterministic report rendering: JSON and flattened CSV.

Floating-point values are printed with 17 significant digits so that
reports round-trip exactly and identical runs produce identical bytes.
"""

import io
import math

import numpy as np


def _fmt(x):
    x = float(x)
    if not math.isfinite(x):
        # strict JSON has no Infinity/NaN literals
        return "null"
    return format(x, ".17g")


def dumps_json(obj, indent=0):
    """Serialize nested dict/list/scalar data with 17-significant-digit floats."""
    out = io.StringIO()
    _write_json(out, obj, indent, 0)
    out.write("\n")
    return out.getvalue()


def _write_json(out, obj, indent, level):
    pad = " " * (indent * (level + 1)) if indent else ""
    closing = " " * (indent * level) if indent else ""
    sep = ",\n" if indent else ", "
    if isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n" if indent else "{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                out.write(sep)
            out.write(f'{pad}"{key}": ')
            _write_json(out, value, indent, level + 1)
        out.write(("\n" + closing + "}") if indent else "}")
    elif isinstance(obj, (list, tuple)):
        items = list(obj)
        if not items:
            out.write("[]")
            return
        out.write("[\n" if indent else "[")
        for i, value in enumerate(items):
            if i:
                out.write(sep)
            if indent:
                out.write(pad)
            _write_json(out, value, indent, level + 1)
        out.write(("\n" + closing + "]") if indent else "]")
    elif isinstance(obj, bool):
        out.write("true" if obj else "false")
    elif obj is None:
        out.write("null")
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.write(_fmt(obj))
    elif isinstance(obj, str):
        out.write('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, np.ndarray):
        _write_json(out, obj.tolist(), indent, level)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def matrix_rows(t, name, matrix):
    """CSV rows ``t, name, i, j, value`` for one matrix (row-major)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    t_text = "" if t is None else _fmt(t)
    rows = []
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            rows.append(f"{t_text},{name},{i},{j},{_fmt(matrix[i, j])}")
    return rows


def scalar_row(t, name, value):
    t_text = "" if t is None else _fmt(t)
    return f"{t_text},{name},0,0,{_fmt(value)}"


def dumps_csv(rows):
    return "\n".join(["t,name,i,j,value", *rows]) + "\n"
