"""Simple polygons: winding numbers, perimeter, weighted areas, hat integrals.

Conventions used throughout the package:

* a point is a length-2 float array (or anything array-like with x, y);
* a vertex list is an (n, 2) float array, the closed polyline being
  ``[v0, v1], ..., [v_{n-1}, v0]``;
* a scalar field is a callable mapping an (k, 2) array of points to (k,)
  values -- deterministic, vectorized evaluation.
"""

from __future__ import annotations

import numpy as np

from .errors import PointOnBoundary, ResampleBrokeSimplicity
from .quadrature import (
    DEFAULT_QUAD,
    QuadratureSpec,
    adaptive_edge_hat,
    integrate_fan,
)

_SIMPLE_TOL_FACTOR = 1e-12  # closest-approach tolerance, times the diameter


def _vertex_array(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise ValueError("vertices must be an (n, 2) array")
    if not np.isfinite(v).all():
        raise ValueError("vertices must be finite")
    return v


def shoelace_area(vertices) -> float:
    """Signed polygon area (positive for counterclockwise order)."""
    v = _vertex_array(vertices)
    nxt = np.roll(v, -1, axis=0)
    return 0.5 * float(np.sum(v[:, 0] * nxt[:, 1] - v[:, 1] * nxt[:, 0]))


def diameter(vertices) -> float:
    """Largest pairwise vertex distance."""
    v = _vertex_array(vertices)
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((d * d).sum(axis=2)).max())


def _segment_pair_distance(p1, q1, p2, q2) -> np.ndarray:
    """Vectorized closest-approach distance between segment batches."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    b = np.einsum("ij,ij->i", d1, d2)
    c = np.einsum("ij,ij->i", d1, r)
    f = np.einsum("ij,ij->i", d2, r)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 0, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        t_lo = t < 0.0
        t_hi = t > 1.0
        t = np.clip(t, 0.0, 1.0)
        s = np.where(t_lo, np.clip(-c / a, 0.0, 1.0), s)
        s = np.where(t_hi, np.clip((b - c) / a, 0.0, 1.0), s)
    c1 = p1 + s[:, None] * d1
    c2 = p2 + t[:, None] * d2
    return np.linalg.norm(c1 - c2, axis=1)


def _point_segment_distance(p, a, b) -> np.ndarray:
    d = b - a
    denom = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.where(denom > 0, denom, 1.0), 0, 1)
    proj = a + t[:, None] * d
    return np.linalg.norm(p - proj, axis=1)


def is_simple(vertices) -> bool:
    """True iff the closed polyline is simple.

    Non-adjacent edges must stay farther apart than 1e-12 times the polygon
    diameter (closest-approach test over all pairs); adjacent edges may meet
    only at their shared vertex (no fold-backs onto the previous edge).
    """
    v = _vertex_array(vertices)
    n = len(v)
    if n < 3:
        return False
    nxt = np.roll(v, -1, axis=0)
    edge_len = np.linalg.norm(nxt - v, axis=1)
    if np.any(edge_len == 0.0):
        return False
    tol = _SIMPLE_TOL_FACTOR * diameter(v)

    ii, jj = np.triu_indices(n, k=1)
    adjacent = (jj - ii == 1) | ((ii == 0) & (jj == n - 1))
    ii_na, jj_na = ii[~adjacent], jj[~adjacent]
    if len(ii_na):
        dist = _segment_pair_distance(v[ii_na], nxt[ii_na], v[jj_na], nxt[jj_na])
        if np.any(dist < tol):
            return False

    # adjacent edges: reject fold-backs, i.e. an endpoint of one edge lying on
    # the other (beyond the shared vertex)
    prv = np.roll(v, 1, axis=0)
    if np.any(_point_segment_distance(nxt, prv, v) < tol):
        return False
    if np.any(_point_segment_distance(prv, v, nxt) < tol):
        return False
    return True


class SimplePolygon:
    """A simple closed polygon; vertex order is preserved, orientation cached.

    The vertices array is frozen after construction.  ``orientation`` is
    "positive" (counterclockwise) or "negative"; atom-producing code paths
    call :meth:`ccw` so reconstructions only ever carry positive supports.
    """

    __slots__ = ("vertices", "orientation", "__weakref__")

    def __init__(self, vertices):
        v = _vertex_array(vertices).copy()
        if len(v) < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        if np.any(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1) == 0.0):
            raise ValueError("consecutive vertices must be distinct")
        if not is_simple(v):
            raise ValueError("polygon is not simple")
        v.setflags(write=False)
        self.vertices = v
        self.orientation = "positive" if shoelace_area(v) > 0 else "negative"

    @property
    def n(self) -> int:
        return len(self.vertices)

    def ccw(self) -> "SimplePolygon":
        """This polygon with positive (counterclockwise) orientation."""
        if self.orientation == "positive":
            return self
        return SimplePolygon(self.vertices[::-1])

    def __repr__(self) -> str:
        return f"SimplePolygon(n={self.n}, orientation={self.orientation})"


def perimeter(poly: SimplePolygon) -> float:
    """Sum of edge lengths."""
    v = poly.vertices
    return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())


def winding_number(vertices, p) -> int:
    """Index of the closed polyline around ``p`` (ray-crossing count).

    Raises PointOnBoundary when ``p`` is within 1e-12 * diameter of an edge.
    """
    v = _vertex_array(vertices)
    p = np.asarray(p, dtype=float).reshape(2)
    nxt = np.roll(v, -1, axis=0)
    tol = _SIMPLE_TOL_FACTOR * diameter(v)
    if np.any(_point_segment_distance(np.broadcast_to(p, v.shape), v, nxt) < tol):
        raise PointOnBoundary(f"point {p} lies on a polygon edge")
    d = nxt - v
    cross = d[:, 0] * (p[1] - v[:, 1]) - d[:, 1] * (p[0] - v[:, 0])
    up = (v[:, 1] <= p[1]) & (nxt[:, 1] > p[1]) & (cross > 0)
    down = (v[:, 1] > p[1]) & (nxt[:, 1] <= p[1]) & (cross < 0)
    return int(up.sum()) - int(down.sum())


def weighted_area(poly: SimplePolygon, eta, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Signed integral of ``eta`` over the polygon.

    Computed as a fan of triangles from the vertex centroid with adaptive
    Gauss quadrature; the sign follows the vertex orientation, so for a
    counterclockwise simple polygon this is the plain integral over the
    enclosed region.
    """
    out = integrate_fan(eta, poly.vertices, quad)
    if out.shape != (1,):
        raise ValueError("weighted_area expects a scalar field")
    return float(out[0])


def edge_hat_integrals(
    poly: SimplePolygon, f, quad: QuadratureSpec = DEFAULT_QUAD
) -> tuple[np.ndarray, np.ndarray]:
    """Line integrals of ``f`` against the per-vertex linear hat weights.

    Returns arrays ``(w_minus, w_plus)`` of shape (n,): ``w_plus[j]`` weights
    ``f`` by the hat that is 1 at vertex j and 0 at vertex j+1 over the
    outgoing edge; ``w_minus[j]`` uses the incoming edge from vertex j-1.
    """
    v = poly.vertices
    segments = np.stack([v, np.roll(v, -1, axis=0)], axis=1)
    out = adaptive_edge_hat(f, segments, quad)
    if out.shape[2] != 1:
        raise ValueError("edge_hat_integrals expects a scalar field")
    w_plus = out[:, 0, 0]
    w_minus = np.roll(out[:, 1, 0], 1)
    return w_minus, w_plus


def resample_polygon(poly: SimplePolygon, n_target: int) -> SimplePolygon:
    """Redistribute vertices at uniform arclength along the boundary.

    Keeps the original orientation and starting vertex.  If the uniform
    placement self-intersects, retries once with the sampling offset shifted
    by half a spacing, then gives up.
    """
    if n_target < 3:
        raise ValueError("n_target must be >= 3")
    v = poly.vertices
    closed = np.vstack([v, v[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    spacing = total / n_target

    def place(offset: float) -> np.ndarray:
        s = (offset + spacing * np.arange(n_target)) % total
        return np.stack(
            [np.interp(s, cum, closed[:, 0]), np.interp(s, cum, closed[:, 1])], axis=1
        )

    for offset in (0.0, 0.5 * spacing):
        candidate = place(offset)
        if is_simple(candidate):
            return SimplePolygon(candidate)
    raise ResampleBrokeSimplicity(
        f"could not place {n_target} uniform vertices on a simple polygon"
    )


def regular_ngon(center, radius: float, n: int, phase: float = 0.0) -> SimplePolygon:
    """Regular n-gon inscribed in the circle of given center and radius (CCW)."""
    c = np.asarray(center, dtype=float).reshape(2)
    ang = phase + 2.0 * np.pi * np.arange(n) / n
    return SimplePolygon(c + radius * np.stack([np.cos(ang), np.sin(ang)], axis=1))


def boundary_distance(poly_a: SimplePolygon, poly_b: SimplePolygon) -> float:
    """Minimum distance between the two polygon boundaries (0 if they cross)."""
    va, vb = poly_a.vertices, poly_b.vertices
    ea = np.stack([va, np.roll(va, -1, axis=0)], axis=1)
    eb = np.stack([vb, np.roll(vb, -1, axis=0)], axis=1)
    ii, jj = np.meshgrid(np.arange(len(ea)), np.arange(len(eb)), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    d = _segment_pair_distance(ea[ii, 0], ea[ii, 1], eb[jj, 0], eb[jj, 1])
    return float(d.min())
