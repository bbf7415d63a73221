"""Sampled Gaussian measurement operator and its dual field.

The operator maps a function u to the m-vector of integrals of u against the
sensing functions phi_j(x) = exp(-|x - c_j|^2 / (2 sigma^2)).  For atomic
functions (sums of weighted polygon indicators) the integrals are polygon
quadratures; the adjoint of a coefficient vector is the smooth field
sum_j p_j phi_j, which doubles as the weight of the isoperimetric oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import SimplePolygon
from .quadrature import DEFAULT_QUAD, QuadratureSpec, adaptive_edge_hat, integrate_fan

if TYPE_CHECKING:  # pragma: no cover
    from .sparse import AtomicFunction


@dataclass(frozen=True)
class GaussianOperator:
    """Sensing grid: m Gaussian bumps of common width sigma."""

    centers: np.ndarray  # (m, 2)
    sigma: float

    def __post_init__(self) -> None:
        c = np.asarray(self.centers, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 1:
            raise ValueError("centers must be an (m, 2) array with m >= 1")
        if not np.isfinite(c).all():
            raise ValueError("centers must be finite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def m(self) -> int:
        return len(self.centers)

    def phi(self, points: np.ndarray) -> np.ndarray:
        """All sensing functions at once: (k, 2) points -> (k, m) values."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = cdist(pts, self.centers, "sqeuclidean")
        return np.exp(-0.5 * d2 / (self.sigma * self.sigma))


@dataclass(frozen=True)
class Measurements:
    """Observed data vector."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float).reshape(-1).copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return len(self.values)


class DualField:
    """Scalar field x -> sum_j coeff_j phi_j(x) (the solver's dual weight)."""

    def __init__(self, operator: GaussianOperator, coefficients) -> None:
        c = np.asarray(coefficients, dtype=float).reshape(-1)
        if len(c) != operator.m:
            raise ValueError("coefficient length must match the operator")
        self.operator = operator
        self.coefficients = c

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.operator.phi(points) @ self.coefficients


def dual_field(op: GaussianOperator, residual_coeffs) -> DualField:
    """Field x -> sum_j coeff_j phi_j(x)."""
    return DualField(op, residual_coeffs)


def unit_forward(
    op: GaussianOperator, poly: SimplePolygon, quad: QuadratureSpec = DEFAULT_QUAD
) -> np.ndarray:
    """Measurement vector of a unit indicator: component j = int_E phi_j.

    Signed with the polygon orientation, like the scalar weighted area; all m
    components come out of one adaptive quadrature pass.
    """
    return integrate_fan(op.phi, poly.vertices, quad)


def forward(
    op: GaussianOperator, u: "AtomicFunction", quad: QuadratureSpec = DEFAULT_QUAD
) -> Measurements:
    """Apply the operator to an atomic function: sum_i a_i * int_{E_i} phi."""
    out = np.zeros(op.m)
    for atom in u.atoms:
        out += atom.amplitude * unit_forward(op, atom.support, quad)
    return Measurements(out)


def edge_measurement_weights(
    op: GaussianOperator, poly: SimplePolygon, quad: QuadratureSpec = DEFAULT_QUAD
) -> tuple[np.ndarray, np.ndarray]:
    """Hat-weighted line integrals of every phi_j along the polygon edges.

    Returns ``(W_minus, W_plus)``, each (n, m): row j holds the integrals of
    phi against the hat centered at vertex j over its incoming / outgoing
    edge, one quadrature pass covering all m components.
    """
    v = poly.vertices
    segments = np.stack([v, np.roll(v, -1, axis=0)], axis=1)
    out = adaptive_edge_hat(op.phi, segments, quad)
    w_plus = out[:, 0, :]
    w_minus = np.roll(out[:, 1, :], 1, axis=0)
    return w_minus, w_plus


def grid_centers(side: int, extent: float) -> np.ndarray:
    """Uniform side x side sampling grid over [-extent, extent]^2.

    Grid points include the boundary (linspace layout); row-major order with
    the second coordinate varying fastest.
    """
    if side < 1:
        raise ValueError("side must be >= 1")
    if not extent > 0:
        raise ValueError("extent must be positive")
    ticks = np.linspace(-extent, extent, side) if side > 1 else np.zeros(1)
    gx, gy = np.meshgrid(ticks, ticks, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def lambda_from_noise(scale: float, m: int, tau: float) -> float:
    """Regularization weight c * sqrt(2 log(m) tau^2) used by the experiments."""
    return scale * np.sqrt(2.0 * np.log(m) * tau * tau)
