"""CSV matrices, breakpoint tables, and structured-text metadata.

All numeric text uses %.17g so round-trips are exact and outputs are
byte-reproducible; JSON is written with sorted keys for the same reason.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .types import InputError

FLOAT_FMT = "%.17g"


def fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def save_matrix(path, arr, header=None) -> None:
    """Write a 1-D or 2-D array as comma-separated rows (vector = column)."""
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"can only save 1-D or 2-D arrays, got ndim={arr.ndim}")
    lines = []
    if header is not None:
        if len(header) != arr.shape[1]:
            raise InputError(f"header has {len(header)} fields for "
                             f"{arr.shape[1]} columns")
        lines.append(",".join(str(h) for h in header))
    for row in arr:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix(path) -> np.ndarray:
    """Read a comma-separated numeric file; a non-numeric first row is a header."""
    text = Path(path).read_text().strip()
    if not text:
        raise InputError(f"{path} is empty")
    rows = text.splitlines()
    start = 0
    try:
        [float(v) for v in rows[0].split(",")]
    except ValueError:
        start = 1
    if start == len(rows):
        raise InputError(f"{path} has a header but no data rows")
    data = [[float(v) for v in r.split(",")] for r in rows[start:]]
    width = len(data[0])
    if any(len(r) != width for r in data):
        raise InputError(f"{path} has ragged rows")
    return np.asarray(data, dtype=float)


def load_vector(path) -> np.ndarray:
    """Read a vector stored as a single column or a single row."""
    arr = load_matrix(path)
    if 1 not in arr.shape:
        raise InputError(f"{path} holds a {arr.shape} matrix, not a vector")
    return arr.ravel()


def save_path_table(path, reg_path) -> None:
    """Breakpoint table: penalty, active set (1-based), all coefficients."""
    lines = ["mu,active_set," + ",".join(f"w{j + 1}" for j in range(reg_path.p))]
    for bp in reg_path.breakpoints:
        w = reg_path.weights_at(float(bp))
        active = ";".join(str(j + 1) for j in sorted(np.flatnonzero(w != 0.0)))
        lines.append(",".join([fmt(bp), active] + [fmt(v) for v in w]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def config_hash(obj) -> str:
    """SHA-256 of the canonical JSON encoding of a config dictionary."""
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
