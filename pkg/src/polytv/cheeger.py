"""Polygonal ascent on the weighted isoperimetric ratio J(E) = |int_E eta| / P(E).

The boundary integrals that drive the ascent are the hat-function edge
integrals w_j^-/w_j^+; together with the outward-normal rotation of the edge
tangents they give the exact gradient of the signed weighted area with
respect to vertex positions, for either orientation of the polygon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateAngle, StalledAtNonSimple
from .geometry import (
    SimplePolygon,
    diameter,
    edge_hat_integrals,
    perimeter,
    weighted_area,
)
from .quadrature import DEFAULT_QUAD, QuadratureSpec

_ANGLE_TOL = 1e-9


@dataclass
class RefineConfig:
    """Armijo-backtracking parameters of the vertex ascent.

    ``step_init`` is dimensionless: the first trial step is
    step_init * diam(E) / max_j ||theta_j||.  ``min_step`` is the absolute
    floor below which backtracking gives up.  ``gain_tol`` stops the ascent
    once two consecutive accepted steps each improve J by less than
    gain_tol * J (relative progress stall); 0, the default, disables it so
    the ascent polishes all the way to grad_tol.
    """

    max_iters: int = 200
    step_init: float = 0.1
    armijo_c: float = 1e-4
    step_shrink: float = 0.5
    grad_tol: float = 1e-6
    min_step: float = 1e-12
    gain_tol: float = 0.0

    def __post_init__(self) -> None:
        for name in ("max_iters", "step_init", "armijo_c", "step_shrink", "grad_tol", "min_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.gain_tol < 0:
            raise ValueError("gain_tol must be nonnegative")
        if not self.armijo_c < 1.0:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not self.step_shrink < 1.0:
            raise ValueError("step_shrink must lie in (0, 1)")


def cheeger_objective(poly: SimplePolygon, eta, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """|int_E eta| / P(E)."""
    return abs(weighted_area(poly, eta, quad)) / perimeter(poly)


def _tangents(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = np.roll(vertices, -1, axis=0) - vertices
    lengths = np.linalg.norm(edges, axis=1)
    return edges / lengths[:, None], lengths


def perimeter_gradient(poly: SimplePolygon) -> np.ndarray:
    """d P / d x_j = tau_{j-1} - tau_j (unit edge tangents)."""
    tau, _ = _tangents(poly.vertices)
    return np.roll(tau, 1, axis=0) - tau


def weighted_area_gradient(poly: SimplePolygon, eta, quad: QuadratureSpec = DEFAULT_QUAD) -> np.ndarray:
    """Gradient of the signed weighted area: w_j^- nu_{j-1} + w_j^+ nu_j.

    nu = (tau_y, -tau_x) is the outward normal for counterclockwise
    orientation; the identity holds verbatim for clockwise polygons because
    the signed area flips together with the normals.
    """
    tau, _ = _tangents(poly.vertices)
    nu = np.stack([tau[:, 1], -tau[:, 0]], axis=1)
    w_minus, w_plus = edge_hat_integrals(poly, eta, quad)
    return w_minus[:, None] * np.roll(nu, 1, axis=0) + w_plus[:, None] * nu


def shape_gradient(
    poly: SimplePolygon,
    eta,
    quad: QuadratureSpec = DEFAULT_QUAD,
    area: Optional[float] = None,
) -> np.ndarray:
    """Steepest-ascent direction of J at the polygon's vertices, one 2-vector per vertex.

    Quotient rule on |A|/P: theta_j = (P sign(A) dA_j - |A| dP_j) / P^2, so a
    displacement x + eps * theta changes J by eps * ||theta||^2 + o(eps).
    ``area`` may pass in an already-computed signed weighted area.
    """
    if area is None:
        area = weighted_area(poly, eta, quad)
    per = perimeter(poly)
    sgn = 1.0 if area >= 0.0 else -1.0
    grad_area = weighted_area_gradient(poly, eta, quad)
    grad_per = perimeter_gradient(poly)
    return (sgn * per * grad_area - abs(area) * grad_per) / per**2


def exterior_angles(poly: SimplePolygon) -> np.ndarray:
    """Signed turn angle at each vertex, from x_j - x_{j-1} to x_{j+1} - x_j."""
    tau, _ = _tangents(poly.vertices)
    tprev = np.roll(tau, 1, axis=0)
    cross = tprev[:, 0] * tau[:, 1] - tprev[:, 1] * tau[:, 0]
    dot = (tprev * tau).sum(axis=1)
    return np.arctan2(cross, dot)


def optimality_residual(poly: SimplePolygon, eta, quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Scaled deviation from the vertex criticality condition w_j^± = rho tan(angle_j / 2).

    rho = (int_E eta) / P(E); the max deviation over vertices and both hat
    halves is reported relative to |rho| * P / n.  Vertices that are straight
    (turn ~ 0, where the condition degenerates to w = 0) or cusped (turn ~
    ±pi, where tan blows up) raise DegenerateAngle.
    """
    ang = exterior_angles(poly)
    bad = (np.abs(ang) < _ANGLE_TOL) | (np.abs(np.abs(ang) - np.pi) < _ANGLE_TOL)
    if bad.any():
        j = int(np.nonzero(bad)[0][0])
        raise DegenerateAngle(
            f"exterior angle {ang[j]:.3e} at vertex {j} leaves the criticality "
            "condition degenerate"
        )
    w_minus, w_plus = edge_hat_integrals(poly, eta, quad)
    per = perimeter(poly)
    rho = weighted_area(poly, eta, quad) / per
    if rho == 0.0:
        return np.inf
    target = rho * np.tan(0.5 * ang)
    dev = max(np.abs(w_plus - target).max(), np.abs(w_minus - target).max())
    return float(dev / (abs(rho) * per / poly.n))


def refine(
    poly0: SimplePolygon,
    eta,
    cfg: RefineConfig = RefineConfig(),
    quad: QuadratureSpec = DEFAULT_QUAD,
    trace: Optional[list] = None,
) -> SimplePolygon:
    """Ascend J by moving vertices along the shape gradient with backtracking.

    Each iteration tries x + alpha * theta starting from alpha =
    step_init * diam / max_j ||theta_j||, halving alpha when the candidate
    polygon is non-simple or the Armijo gain armijo_c * alpha * ||theta||^2
    is not met.  Terminates when the scale-free gradient norm
    ||theta|| * diam / J drops below grad_tol, when two consecutive accepted
    steps each gain less than gain_tol * J, when alpha underflows min_step,
    or at max_iters.  J never decreases across accepted steps.

    When ``trace`` is a list, a row (iteration, J, accepted step, gradient
    norm) is appended per iteration.

    Raises StalledAtNonSimple if every trial step down to min_step produced
    a self-intersecting polygon.
    """
    poly = poly0
    area = weighted_area(poly, eta, quad)
    j_val = abs(area) / perimeter(poly)
    alpha_prev = None
    stalled = 0
    for it in range(1, cfg.max_iters + 1):
        theta = shape_gradient(poly, eta, quad, area=area)
        gnorm2 = float((theta * theta).sum())
        gnorm = np.sqrt(gnorm2)
        diam = diameter(poly.vertices)
        if gnorm * diam / max(j_val, 1e-300) < cfg.grad_tol:
            break
        alpha = cfg.step_init * diam / np.linalg.norm(theta, axis=1).max()
        # Warm start: near the optimum the accepted step stabilises, so trying
        # a modest multiple of the last accepted step skips most backtracks.
        if alpha_prev is not None:
            alpha = min(alpha, 4.0 * alpha_prev)
        accepted = False
        saw_simple = False
        while alpha >= cfg.min_step:
            try:
                cand = SimplePolygon(poly.vertices + alpha * theta)
            except ValueError:
                alpha *= cfg.step_shrink
                continue
            saw_simple = True
            cand_area = weighted_area(cand, eta, quad)
            j_cand = abs(cand_area) / perimeter(cand)
            if j_cand >= j_val + cfg.armijo_c * alpha * gnorm2:
                rel_gain = (j_cand - j_val) / max(j_val, 1e-300)
                poly, j_val, area = cand, j_cand, cand_area
                accepted = True
                alpha_prev = alpha
                break
            alpha *= cfg.step_shrink
        if trace is not None:
            trace.append((it, j_val, alpha if accepted else 0.0, gnorm))
        if not accepted:
            if not saw_simple:
                raise StalledAtNonSimple(
                    "every ascent step down to min_step broke polygon simplicity"
                )
            break
        if cfg.gain_tol > 0.0 and rel_gain < cfg.gain_tol:
            stalled += 1
            if stalled >= 2:
                break
        else:
            stalled = 0
    return poly
