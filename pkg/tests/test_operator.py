"""Sensing operator: direct formulas, duality identities, measurement layout."""

import numpy as np
import pytest

from helpers import TIGHT_QUAD, random_star_polygon
from polytv import (
    Atom,
    AtomicFunction,
    GaussianOperator,
    Measurements,
    dual_field,
    edge_hat_integrals,
    forward,
    grid_centers,
    lambda_from_noise,
    regular_ngon,
    unit_forward,
    weighted_area,
)
from polytv.operator import edge_measurement_weights


def small_op(m_side=2, sigma=0.5, extent=0.8):
    return GaussianOperator(centers=grid_centers(m_side, extent), sigma=sigma)


def test_phi_matches_direct_formula():
    rng = np.random.default_rng(2)
    centers = rng.uniform(-1, 1, (7, 2))
    sigma = 0.37
    op = GaussianOperator(centers=centers, sigma=sigma)
    pts = rng.uniform(-2, 2, (11, 2))
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    direct = np.exp(-0.5 * d2 / sigma**2)
    assert np.allclose(op.phi(pts), direct, atol=1e-15)


def test_phi_accepts_single_point():
    op = small_op()
    row = op.phi(np.array([0.1, 0.2]))
    assert row.shape == (1, op.m)


def test_operator_validation():
    with pytest.raises(ValueError):
        GaussianOperator(centers=np.zeros((3, 3)), sigma=1.0)
    with pytest.raises(ValueError):
        GaussianOperator(centers=np.zeros((2, 2)), sigma=0.0)
    with pytest.raises(ValueError):
        GaussianOperator(centers=np.array([[np.inf, 0.0]]), sigma=1.0)


def test_centers_are_frozen():
    op = small_op()
    with pytest.raises(ValueError):
        op.centers[0, 0] = 3.0


def test_unit_forward_matches_scalar_weighted_area():
    """Component j of the unit forward map is the integral of phi_j."""
    op = small_op()
    rng = np.random.default_rng(4)
    poly = random_star_polygon(rng, radius=0.5)
    vec = unit_forward(op, poly, TIGHT_QUAD)
    assert vec.shape == (op.m,)
    for j in range(op.m):
        phi_j = lambda p, j=j: op.phi(p)[:, j]
        assert vec[j] == pytest.approx(
            weighted_area(poly, phi_j, TIGHT_QUAD), rel=1e-8, abs=1e-13
        )


def test_unit_forward_disk_closed_form():
    """A fine polygon inscribed in a disk around a center: 2 pi s^2 (1 - e^{-R^2/2s^2})."""
    sigma = 0.6
    op = GaussianOperator(centers=np.array([[0.25, -0.4]]), sigma=sigma)
    radius = 0.8
    poly = regular_ngon((0.25, -0.4), radius, 512)
    exact = 2.0 * np.pi * sigma**2 * (1.0 - np.exp(-0.5 * (radius / sigma) ** 2))
    # the inscribed 512-gon differs from the disk by O(n^-2) in area
    assert unit_forward(op, poly, TIGHT_QUAD)[0] == pytest.approx(exact, rel=3e-4)


def test_forward_is_linear_in_amplitudes():
    op = small_op()
    rng = np.random.default_rng(9)
    p1 = random_star_polygon(rng, radius=0.4, center=(-0.4, 0.3))
    p2 = random_star_polygon(rng, radius=0.3, center=(0.5, -0.2))
    u = AtomicFunction([Atom(1.7, p1), Atom(-0.6, p2)])
    got = forward(op, u, TIGHT_QUAD).values
    want = 1.7 * unit_forward(op, p1, TIGHT_QUAD) - 0.6 * unit_forward(
        op, p2, TIGHT_QUAD
    )
    assert np.allclose(got, want, rtol=1e-12, atol=1e-15)


def test_dual_field_is_coefficient_combination():
    op = small_op()
    rng = np.random.default_rng(14)
    coeffs = rng.standard_normal(op.m)
    fld = dual_field(op, coeffs)
    pts = rng.uniform(-1, 1, (6, 2))
    assert np.allclose(fld(pts), op.phi(pts) @ coeffs, atol=1e-15)
    with pytest.raises(ValueError):
        dual_field(op, coeffs[:-1])


def test_adjoint_identity():
    """<Phi 1_E, p> equals the integral over E of the p-weighted field.

    This duality is what lets the solver treat the residual correlation as a
    weighted-area problem; both sides are computed through different code
    paths (vector quadrature vs scalar quadrature of the combined field).
    """
    op = small_op(m_side=3, sigma=0.4)
    rng = np.random.default_rng(17)
    for _ in range(3):
        poly = random_star_polygon(rng, radius=0.6)
        p = rng.standard_normal(op.m)
        lhs = float(unit_forward(op, poly, TIGHT_QUAD) @ p)
        rhs = weighted_area(poly, dual_field(op, p), TIGHT_QUAD)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-13)


def test_edge_measurement_weights_match_scalar_hats():
    op = small_op()
    rng = np.random.default_rng(23)
    poly = random_star_polygon(rng, radius=0.5)
    w_minus, w_plus = edge_measurement_weights(op, poly, TIGHT_QUAD)
    assert w_minus.shape == (poly.n, op.m)
    assert w_plus.shape == (poly.n, op.m)
    for j in range(op.m):
        phi_j = lambda p, j=j: op.phi(p)[:, j]
        sm, sp = edge_hat_integrals(poly, phi_j, TIGHT_QUAD)
        assert np.allclose(w_minus[:, j], sm, rtol=1e-8, atol=1e-14)
        assert np.allclose(w_plus[:, j], sp, rtol=1e-8, atol=1e-14)


def test_grid_centers_layout():
    pts = grid_centers(3, 1.0)
    assert pts.shape == (9, 2)
    assert np.allclose(pts[0], [-1.0, -1.0])
    assert np.allclose(pts[1], [-1.0, 0.0])  # second coordinate moves first
    assert np.allclose(pts[-1], [1.0, 1.0])
    assert len(np.unique(pts, axis=0)) == 9
    assert np.allclose(grid_centers(1, 2.0), [[0.0, 0.0]])
    with pytest.raises(ValueError):
        grid_centers(0, 1.0)
    with pytest.raises(ValueError):
        grid_centers(3, -1.0)


def test_measurements_flatten_and_freeze():
    y = Measurements(np.array([[1.0], [2.0]]))
    assert y.values.shape == (2,)
    assert y.m == 2
    with pytest.raises(ValueError):
        y.values[0] = 7.0


def test_lambda_from_noise_formula():
    m, tau, scale = 256, 0.002, 1.3
    assert lambda_from_noise(scale, m, tau) == pytest.approx(
        scale * np.sqrt(2.0 * np.log(m)) * tau, rel=1e-14
    )
