"""Delimited and raster output formats.

All text outputs are byte-deterministic for a given input: floats are written
with ``repr`` (shortest round-trip form), JSON with sorted keys, PGM in ASCII
(P2).  Grid CSV indices are 1-based, matching the cell convention
C_ij = [-R+(i-1)h, -R+ih] x [-R+(j-1)h, -R+jh].
"""

from __future__ import annotations

import json
import os

import numpy as np

from .geometry import SimplePolygon


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def write_measurements_csv(path: str, values: np.ndarray) -> None:
    write_csv(path, ["j", "value"], ((j + 1, v) for j, v in enumerate(values)))


def read_measurements_csv(path: str) -> np.ndarray:
    _, rows = read_csv(path)
    return np.array([float(r[1]) for r in rows])


def write_polygons_csv(path: str, polygons: list[SimplePolygon]) -> None:
    """One row per vertex: atom_index,vertex_index,x,y (both indices 1-based)."""

    def rows():
        for ai, poly in enumerate(polygons, start=1):
            for vi, (x, y) in enumerate(poly.vertices, start=1):
                yield ai, vi, x, y

    write_csv(path, ["atom_index", "vertex_index", "x", "y"], rows())


def read_polygons_csv(path: str) -> list[SimplePolygon]:
    _, rows = read_csv(path)
    by_atom: dict[int, list[tuple[float, float]]] = {}
    for r in rows:
        by_atom.setdefault(int(r[0]), []).append((float(r[2]), float(r[3])))
    return [SimplePolygon(np.array(by_atom[k])) for k in sorted(by_atom)]


def write_grid_csv(path: str, values: np.ndarray) -> None:
    n_i, n_j = values.shape

    def rows():
        for i in range(n_i):
            for j in range(n_j):
                yield i + 1, j + 1, values[i, j]

    write_csv(path, ["i", "j", "value"], rows())


def write_pgm(path: str, values: np.ndarray) -> None:
    """8-bit ASCII PGM, min-max scaled; constant images come out all-zero.

    Rows run top to bottom in y (j descending), columns left to right in x.
    """
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        img = np.rint((v - lo) / (hi - lo) * 255.0).astype(int)
    else:
        img = np.zeros(v.shape, dtype=int)
    n_i, n_j = img.shape
    lines = ["P2", f"{n_i} {n_j}", "255"]
    for j in range(n_j - 1, -1, -1):
        lines.append(" ".join(str(img[i, j]) for i in range(n_i)))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)
