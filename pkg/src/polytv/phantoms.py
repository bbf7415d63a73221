"""Piecewise-constant test images built from amplitude x polygon atoms.

Each primitive returns a list of atoms so that shapes needing more than one
polygon (the annulus) fit the same interface; a phantom is just the
concatenation of its primitives' atom lists.
"""

from __future__ import annotations

import numpy as np

from .geometry import SimplePolygon, regular_ngon
from .sparse import Atom, AtomicFunction


def disk(center, radius: float, amplitude: float, n_vertices: int = 64) -> list[Atom]:
    """Disk approximated by an inscribed regular polygon (CCW)."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    return [Atom(float(amplitude), regular_ngon(center, radius, n_vertices))]


def rectangle(
    xmin: float, ymin: float, xmax: float, ymax: float, amplitude: float
) -> list[Atom]:
    """Axis-aligned rectangle [xmin, xmax] x [ymin, ymax]."""
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("rectangle must have positive width and height")
    verts = np.array(
        [[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]], dtype=float
    )
    return [Atom(float(amplitude), SimplePolygon(verts))]


def ngon(
    center, radius: float, n: int, amplitude: float, phase: float = 0.0
) -> list[Atom]:
    """Regular n-gon inscribed in the circle of given center and radius."""
    if n < 3:
        raise ValueError("n must be >= 3")
    if not radius > 0:
        raise ValueError("radius must be positive")
    return [Atom(float(amplitude), regular_ngon(center, radius, n, phase))]


def annulus(
    center,
    r_inner: float,
    r_outer: float,
    amplitude: float,
    n_vertices: int = 64,
) -> list[Atom]:
    """Ring of value ``amplitude``: outer polygon minus inner polygon.

    Realized as two concentric atoms with opposite amplitudes; their TV is the
    sum of the two perimeters, matching the exact TV of the ring.
    """
    if not 0 < r_inner < r_outer:
        raise ValueError("need 0 < r_inner < r_outer")
    return [
        Atom(float(amplitude), regular_ngon(center, r_outer, n_vertices)),
        Atom(-float(amplitude), regular_ngon(center, r_inner, n_vertices)),
    ]


def three_atom_phantom() -> AtomicFunction:
    """Default benchmark scene on [-1, 1]^2: disk, rectangle, pentagon.

    Shapes are well separated so the additive TV evaluation is exact, and all
    supports fit inside the unit square with margin.
    """
    atoms = (
        disk((-0.45, 0.45), 0.32, 1.0)
        + rectangle(0.1, -0.75, 0.8, -0.3, -0.8)
        + ngon((0.45, 0.5), 0.3, 5, 0.6, phase=0.3)
    )
    return AtomicFunction(atoms)
