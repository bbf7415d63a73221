"""Adaptive Gauss quadrature over triangle fans, polygon edges, and grid cells.

Fields are callables mapping an (k, 2) array of points to either (k,) values
(scalar field) or (k, m) values (one column per sensing component).  All
engines evaluate the field in large batches and subdivide breadth-first, so
the per-call Python overhead is O(depth), not O(number of leaves).

Error control: a first pass over the root elements fixes the absolute budget
``refine_tol * S`` where ``S`` is the largest component magnitude of the crude
estimate; the budget is then distributed across elements proportionally to
their (unsigned) area or length.  An element is accepted when the difference
between its one-level and two-level estimates fits its share of the budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QuadratureNotConverged

_TINY = 1e-300
_MAX_ACTIVE = 1 << 19  # hard cap on simultaneously refined elements


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature parameters: rule sizes and adaptive-refinement control.

    triangle_rule_order : points of the symmetric Gauss rule per triangle
    edge_rule_order     : Gauss-Legendre points per edge segment
    refine_tol          : relative tolerance driving adaptive subdivision
    max_subdivision_depth : dyadic subdivision levels before giving up
    """

    triangle_rule_order: int = 7
    edge_rule_order: int = 5
    refine_tol: float = 1e-6
    max_subdivision_depth: int = 10

    def __post_init__(self) -> None:
        if self.triangle_rule_order < 1 or self.edge_rule_order < 1:
            raise ValueError("quadrature rule orders must be >= 1")
        if not self.refine_tol > 0:
            raise ValueError("refine_tol must be positive")
        if self.max_subdivision_depth < 0:
            raise ValueError("max_subdivision_depth must be >= 0")


DEFAULT_QUAD = QuadratureSpec()


def _triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric nodes and weights (summing to 1) for a triangle rule."""
    if order == 1:
        bary = np.array([[1.0, 1.0, 1.0]]) / 3.0
        wts = np.array([1.0])
    elif order == 3:
        # midpoint rule, degree 2
        bary = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        wts = np.full(3, 1.0 / 3.0)
    elif order == 7:
        # classic 7-point symmetric rule, degree 5
        s15 = np.sqrt(15.0)
        a = (6.0 - s15) / 21.0
        b = (6.0 + s15) / 21.0
        wa = (155.0 - s15) / 1200.0
        wb = (155.0 + s15) / 1200.0
        bary = np.array(
            [
                [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
                [a, a, 1.0 - 2.0 * a],
                [a, 1.0 - 2.0 * a, a],
                [1.0 - 2.0 * a, a, a],
                [b, b, 1.0 - 2.0 * b],
                [b, 1.0 - 2.0 * b, b],
                [1.0 - 2.0 * b, b, b],
            ]
        )
        wts = np.array([9.0 / 40.0, wa, wa, wa, wb, wb, wb])
    else:
        raise ValueError(f"unsupported triangle rule order {order} (use 1, 3 or 7)")
    return bary, wts


def gauss_legendre_01(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [0, 1] (weights sum to 1)."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _field_values(f, pts: np.ndarray) -> np.ndarray:
    """Evaluate a field on (k, 2) points, normalizing output to (k, m)."""
    vals = np.asarray(f(pts), dtype=float)
    if vals.ndim == 1:
        return vals[:, None]
    if vals.ndim == 2 and vals.shape[0] == pts.shape[0]:
        return vals
    raise ValueError("field must map (k,2) points to (k,) or (k,m) values")


def _subdivide_triangles(tris: np.ndarray) -> np.ndarray:
    """Split (B,3,2) triangles at edge midpoints into (B,4,3,2) children."""
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    m01 = 0.5 * (v0 + v1)
    m12 = 0.5 * (v1 + v2)
    m20 = 0.5 * (v2 + v0)
    c0 = np.stack([v0, m01, m20], axis=1)
    c1 = np.stack([m01, v1, m12], axis=1)
    c2 = np.stack([m20, m12, v2], axis=1)
    c3 = np.stack([m01, m12, m20], axis=1)
    return np.stack([c0, c1, c2, c3], axis=1)


def adaptive_triangle_sum(f, tris: np.ndarray, spec: QuadratureSpec) -> np.ndarray:
    """Integral of ``f`` over a signed collection of triangles, shape (m,).

    ``tris`` is (T, 3, 2); each triangle contributes with the sign of its
    vertex order, so a fan over a polygon reproduces the winding-weighted
    (signed) integral.
    """
    tris = np.asarray(tris, dtype=float)
    bary, wts = _triangle_rule(spec.triangle_rule_order)
    k = len(wts)

    bary_row = bary[None, :, :]
    wts_row = wts[None, None, :]

    def rule(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        e1 = batch[:, 1] - batch[:, 0]
        e2 = batch[:, 2] - batch[:, 0]
        signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        nodes = np.matmul(bary_row, batch)  # (B, k, 2)
        vals = _field_values(f, nodes.reshape(-1, 2)).reshape(len(batch), k, -1)
        return signed[:, None] * np.matmul(wts_row, vals)[:, 0, :], signed

    i_act, s_act = rule(tris)
    m = i_act.shape[1]
    scale = np.abs(i_act).sum(axis=0).max() if len(i_act) else 0.0
    tol_total = spec.refine_tol * max(scale, _TINY)
    area_total = max(np.abs(s_act).sum(), _TINY)

    total = np.zeros(m)
    active = tris
    for _ in range(spec.max_subdivision_depth):
        if active.shape[0] > _MAX_ACTIVE:
            raise QuadratureNotConverged(
                f"triangle refinement exceeded {_MAX_ACTIVE} active elements"
            )
        children = _subdivide_triangles(active)
        i_ch, _ = rule(children.reshape(-1, 3, 2))
        i_ch = i_ch.reshape(-1, 4, m)
        i_fine = i_ch.sum(axis=1)
        err = np.abs(i_fine - i_act).max(axis=1)
        budget = tol_total * np.abs(s_act) / area_total
        done = err <= budget
        if done.any():
            total += i_fine[done].sum(axis=0)
        if done.all():
            return total
        keep = ~done
        active = children[keep].reshape(-1, 3, 2)
        i_act = i_ch[keep].reshape(-1, m)
        s_act = np.repeat(s_act[keep] / 4.0, 4)
    raise QuadratureNotConverged(
        f"triangle quadrature did not converge in {spec.max_subdivision_depth} levels"
    )


def integrate_fan(f, vertices: np.ndarray, spec: QuadratureSpec) -> np.ndarray:
    """Signed integral of ``f`` over a polygon via a fan from the vertex centroid."""
    v = np.asarray(vertices, dtype=float)
    apex = v.mean(axis=0)
    nxt = np.roll(v, -1, axis=0)
    tris = np.stack([np.broadcast_to(apex, v.shape), v, nxt], axis=1)
    return adaptive_triangle_sum(f, tris, spec)


def adaptive_edge_hat(f, segments: np.ndarray, spec: QuadratureSpec) -> np.ndarray:
    """Per-edge integrals of ``f`` against the two linear hat weights.

    ``segments`` is (S, 2, 2); the result is (S, 2, m) where ``out[j, 0]`` is
    the integral of f(x(t)) * (1 - t) * |edge_j| (hat centered on the edge's
    start vertex) and ``out[j, 1]`` the integral against t (end vertex).
    """
    segments = np.asarray(segments, dtype=float)
    n_roots = segments.shape[0]
    tq, wq = gauss_legendre_01(spec.edge_rule_order)

    p0 = segments[:, 0]
    p1 = segments[:, 1]
    # affine weight values at the local endpoints: column 0 for the "start"
    # hat, column 1 for the "end" hat
    wa = np.tile(np.array([[1.0, 0.0]]), (n_roots, 1))
    wb = np.tile(np.array([[0.0, 1.0]]), (n_roots, 1))
    roots = np.arange(n_roots)

    def rule(q0, q1, a, b):
        nodes = q0[:, None, :] + tq[None, :, None] * (q1 - q0)[:, None, :]
        vals = _field_values(f, nodes.reshape(-1, 2)).reshape(len(q0), len(tq), -1)
        length = np.linalg.norm(q1 - q0, axis=1)
        aw = (a[:, 0, None] * (1.0 - tq)[None, :] + a[:, 1, None] * tq[None, :]) * wq
        bw = (b[:, 0, None] * (1.0 - tq)[None, :] + b[:, 1, None] * tq[None, :]) * wq
        ia = np.matmul(aw[:, None, :], vals)[:, 0]
        ib = np.matmul(bw[:, None, :], vals)[:, 0]
        return length[:, None, None] * np.stack([ia, ib], axis=1)  # (B,2,m)

    i_act = rule(p0, p1, wa, wb)
    m = i_act.shape[2]
    scale = np.abs(i_act).sum(axis=0).max() if n_roots else 0.0
    tol_total = spec.refine_tol * max(scale, _TINY)
    len_act = np.linalg.norm(p1 - p0, axis=1)
    len_total = max(len_act.sum(), _TINY)

    out = np.zeros((n_roots, 2, m))
    for _ in range(spec.max_subdivision_depth):
        if len(p0) > _MAX_ACTIVE:
            raise QuadratureNotConverged(
                f"edge refinement exceeded {_MAX_ACTIVE} active elements"
            )
        mid = 0.5 * (p0 + p1)
        am = 0.5 * (wa[:, 0] + wa[:, 1])
        bm = 0.5 * (wb[:, 0] + wb[:, 1])
        ca = np.stack([np.stack([wa[:, 0], am], 1), np.stack([am, wa[:, 1]], 1)], 0)
        cb = np.stack([np.stack([wb[:, 0], bm], 1), np.stack([bm, wb[:, 1]], 1)], 0)
        q0 = np.concatenate([p0, mid])
        q1 = np.concatenate([mid, p1])
        i_ch = rule(q0, q1, ca.reshape(-1, 2), cb.reshape(-1, 2))
        half = len(p0)
        i_fine = i_ch[:half] + i_ch[half:]
        err = np.abs(i_fine - i_act).reshape(half, -1).max(axis=1)
        budget = tol_total * len_act / len_total
        done = err <= budget
        if done.any():
            np.add.at(out, roots[done], i_fine[done])
        if done.all():
            return out
        keep = ~done
        p0 = q0[np.concatenate([keep, keep])]
        p1 = q1[np.concatenate([keep, keep])]
        wa = ca.reshape(-1, 2)[np.concatenate([keep, keep])]
        wb = cb.reshape(-1, 2)[np.concatenate([keep, keep])]
        i_act = np.concatenate([i_ch[:half][keep], i_ch[half:][keep]])
        roots = np.concatenate([roots[keep], roots[keep]])
        len_act = np.concatenate([len_act[keep] / 2.0, len_act[keep] / 2.0])
    raise QuadratureNotConverged(
        f"edge quadrature did not converge in {spec.max_subdivision_depth} levels"
    )


def tensor_cell_averages(f, half_width: float, n_cells: int, order: int) -> np.ndarray:
    """Cell averages of a scalar field on the n x n mesh of [-R, R]^2.

    Entry (i, j) is the average over the cell with x-index i and y-index j;
    a Gauss-Legendre tensor rule of the given order is used per cell.
    """
    t, w = np.polynomial.legendre.leggauss(order)
    h = 2.0 * half_width / n_cells
    centers = -half_width + (np.arange(n_cells) + 0.5) * h
    nodes = centers[:, None] + 0.5 * h * t[None, :]  # (N, k)
    xs = np.broadcast_to(nodes[:, :, None, None], (n_cells, order, n_cells, order))
    ys = np.broadcast_to(nodes[None, None, :, :], (n_cells, order, n_cells, order))
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    vals = np.asarray(f(pts), dtype=float)
    if vals.ndim != 1:
        raise ValueError("tensor_cell_averages expects a scalar field")
    vals = vals.reshape(n_cells, order, n_cells, order)
    return np.einsum("a,b,iajb->ij", w, w, vals) / 4.0
