"""Shared generators for the test suite: random polygons and smooth fields."""

import numpy as np

from polytv import SimplePolygon

# tight quadrature used whenever a test compares against an analytic oracle;
# loose enough to stay fast, tight enough that quadrature error never
# dominates the tolerance under test
from polytv import QuadratureSpec

TIGHT_QUAD = QuadratureSpec(refine_tol=1e-10)


def random_star_polygon(rng, n_lo=5, n_hi=12, radius=1.0, center=(0.0, 0.0)):
    """Random simple polygon, star-shaped about ``center``.

    Sorted distinct angles with jittered radii always give a simple polygon;
    a minimum angular gap keeps the vertices well separated so the geometry
    routines are tested away from their degeneracy tolerances.
    """
    center = np.asarray(center, dtype=float)
    n = int(rng.integers(n_lo, n_hi + 1))
    while True:
        ang = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2.0 * np.pi]]))
        # bounded gaps keep vertices separated and the center strictly inside
        if gaps.min() > 0.08 and gaps.max() < 2.5:
            break
    rad = radius * rng.uniform(0.6, 1.4, n)
    verts = center + rad[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return SimplePolygon(verts)


def random_gaussian_mixture(rng, k=4, box=1.0, width_lo=0.4, width_hi=1.2):
    """Random smooth scalar field: signed sum of k Gaussian bumps."""
    centers = rng.uniform(-box, box, (k, 2))
    widths = rng.uniform(width_lo, width_hi, k)
    signs = rng.choice([-1.0, 1.0], k)
    weights = signs * rng.uniform(0.5, 1.5, k)

    def field(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        return (weights * np.exp(-0.5 * d2 / widths**2)).sum(axis=1)

    return field


def gauss_line_integral(f, a, b, order=60):
    """High-order Gauss-Legendre integral of f along the segment [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (x + 1.0)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    length = float(np.linalg.norm(b - a))
    return 0.5 * length * float(w @ np.asarray(f(pts)))


def gauss_hat_integrals(f, a, b, order=60):
    """Integrals of f times the two linear hats along [a, b] (start, end)."""
    x, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (x + 1.0)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    pts = a[None, :] + t[:, None] * (b - a)[None, :]
    vals = np.asarray(f(pts))
    length = float(np.linalg.norm(b - a))
    start = 0.5 * length * float(w @ (vals * (1.0 - t)))
    end = 0.5 * length * float(w @ (vals * t))
    return start, end
