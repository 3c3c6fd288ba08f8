"""File helpers: atomic writes and the CSV formats used by the CLI.

Floating-point values are written with 17 significant digits so they
round-trip exactly through text.
"""

from __future__ import annotations

import csv
import os
import tempfile

import numpy as np

from .errors import StateFileError

FLOAT_FMT = "%.17g"


def fmt(value: float) -> str:
    return FLOAT_FMT % float(value)


def atomic_write_text(path, text: str) -> None:
    """Write text to a temporary file and rename it into place."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _rows_to_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_design_csv(path, points: np.ndarray) -> None:
    points = np.asarray(points, dtype=float)
    header = [f"x{j + 1}" for j in range(points.shape[1])]
    rows = [[fmt(v) for v in row] for row in points]
    atomic_write_text(path, _rows_to_csv(header, rows))


def write_responses_csv(path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float)
    header = [f"y{j + 1}" for j in range(values.shape[1])]
    rows = [[fmt(v) for v in row] for row in values]
    atomic_write_text(path, _rows_to_csv(header, rows))


def write_slices_csv(path, sliced) -> None:
    """Sliced candidate set with a leading slice-index column."""
    header = ["slice"] + [f"x{j + 1}" for j in range(sliced.k)]
    rows = []
    for idx, sl in enumerate(sliced.slices):
        for row in sl.points:
            rows.append([str(idx)] + [fmt(v) for v in row])
    atomic_write_text(path, _rows_to_csv(header, rows))


def read_matrix_csv(path, prefix: str) -> np.ndarray:
    """Read a design/response CSV written by this package."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        expected = [f"{prefix}{j + 1}" for j in range(len(header))]
        if header != expected:
            raise ValueError(f"{path}: expected header {expected}, got {header}")
        data = [[float(v) for v in row] for row in reader if row]
    if not data:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(data, dtype=float)


def write_trace_csv(path, trace_rows, k: int) -> None:
    header = ["iteration"] + [f"x{j + 1}" for j in range(k)] \
        + ["min_dist_h", "criterion", "l_pc"]
    rows = []
    for rec in trace_rows:
        rows.append(
            [str(rec["iteration"])]
            + [fmt(v) for v in rec["point"]]
            + [fmt(rec["min_dist_h"]), fmt(rec["criterion"]), str(rec["l_pc"])]
        )
    atomic_write_text(path, _rows_to_csv(header, rows))


def append_metrics_csv(path, method: str, seed: int, n: int, aid_x: float,
                       aid_h: float, mpv_values) -> None:
    path = os.fspath(path)
    mpv_values = list(mpv_values)
    header = ["method", "seed", "N", "aid_x", "aid_h"] \
        + [f"mpv_{j + 1}" for j in range(len(mpv_values))]
    row = [method, str(seed), str(n), fmt(aid_x), fmt(aid_h)] \
        + [fmt(v) for v in mpv_values]
    exists = os.path.exists(path)
    with open(path, "a", encoding="utf-8", newline="") as fh:
        if not exists:
            fh.write(",".join(header) + "\n")
        fh.write(",".join(row) + "\n")


def write_bench_csv(path, rows) -> None:
    width = max((len(r.mpv) for r in rows), default=0)
    header = ["problem", "method", "initial", "seed", "N", "aid_x", "aid_h"] \
        + [f"mpv_{j + 1}" for j in range(width)]
    out = []
    for r in rows:
        mpv = [fmt(v) for v in r.mpv] + [""] * (width - len(r.mpv))
        out.append([r.problem, r.method, r.initial, str(r.seed), str(r.n),
                    fmt(r.aid_x), fmt(r.aid_h)] + mpv)
    atomic_write_text(path, _rows_to_csv(header, out))


def write_mpv_trace_csv(path, rows) -> None:
    width = max((len(r.mpv) for r in rows), default=0)
    header = ["problem", "method", "initial", "seed", "n"] \
        + [f"mpv_{j + 1}" for j in range(width)]
    out = []
    for r in rows:
        mpv = [fmt(v) for v in r.mpv] + [""] * (width - len(r.mpv))
        out.append([r.problem, r.method, r.initial, str(r.seed), str(r.n)] + mpv)
    atomic_write_text(path, _rows_to_csv(header, out))


def load_json(path) -> dict:
    import json

    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as err:
        raise StateFileError(f"file not found: {path}") from err
    except (OSError, ValueError) as err:
        raise StateFileError(f"unreadable JSON file {path}: {err}") from err
