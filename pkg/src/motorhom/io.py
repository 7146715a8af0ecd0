"""File emission helpers (atomic writes, two-column data, gnuplot stubs)."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temporary sibling and rename, so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_columns(path: str | Path, columns: dict[str, np.ndarray], comment: str = "") -> None:
    """Whitespace-separated columns with a ``#`` header (gnuplot-readable)."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float).ravel() for k in names])
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("# " + " ".join(names))
    lines += [" ".join(repr(float(v)) for v in row) for row in data]
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_csv(path: str | Path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float).ravel() for k in names])
    lines = [",".join(names)] + [",".join(repr(float(v)) for v in row) for row in data]
    atomic_write_text(path, "\n".join(lines) + "\n")


def gnuplot_stub(path: str | Path, data_file: str, xlabel: str, ylabel: str, title: str) -> None:
    script = (
        f"set title '{title}'\n"
        f"set xlabel '{xlabel}'\n"
        f"set ylabel '{ylabel}'\n"
        "set grid\n"
        f"plot '{data_file}' using 1:2 with lines notitle\n"
    )
    atomic_write_text(path, script)
