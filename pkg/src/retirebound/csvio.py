"""Plain CSV tables with ``# key=value`` metadata lines.

Floats are written with ``repr`` (shortest round-trip form), booleans as
``true``/``false`` and missing values as empty fields, so parsing and
re-serialising a table reproduces it byte for byte.
"""

from __future__ import annotations

import io
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = ["format_value", "table_text", "parse_table", "write_text"]


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _parse_value(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s) if s.lstrip("-").isdigit() else float(s)
    except ValueError:
        return s


def table_text(columns: Sequence[str], rows: Iterable[Mapping], meta: Mapping[str, object] | None = None) -> str:
    buf = io.StringIO(newline="")
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={format_value(v)}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(format_value(row.get(c)) for c in columns) + "\n")
    return buf.getvalue()


def parse_table(text: str) -> tuple[dict[str, str], list[str], list[dict]]:
    """(metadata, columns, typed rows)."""
    meta: dict[str, str] = {}
    columns: list[str] | None = None
    rows = []
    for line in text.split("\n"):
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif columns is None:
            columns = line.split(",")
        elif line:
            rows.append({c: _parse_value(v) for c, v in zip(columns, line.split(","))})
    return meta, columns or [], rows


def write_text(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)
