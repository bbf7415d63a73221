"""Semi-analytic machinery for the single radial measurement case.

For a radially symmetric sensing function with profile ``g`` (value at radius
r), the optimal supports are disks centered at the origin and everything of
interest reduces to one-dimensional integrals:

* ``G(R)   = (1/R) * int_0^R r g(r) dr``       -- disk objective (ratio of the
  weighted area of B(0, R) to its perimeter, common 2*pi factor dropped);
* ``R_star``    -- the unique maximizer of G, computed as the root of
  ``R^2 g(R) = int_0^R r g(r) dr``;
* ``G_n(R)``    -- same ratio for the regular n-gon inscribed in B(0, R);
* ``R_star_n``  -- the maximizer of G_n;
* the closed-form single-measurement amplitude.

These provide the package's independent ground truth for tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import AssumptionViolated

#: number of log-grid points used by the numeric profile check
_CHECK_POINTS = 10_000


def _as_scalar_fn(g) -> Callable[[float], float]:
    return lambda r: float(np.asarray(g(np.asarray([r], dtype=float)))[0])


@dataclass(frozen=True)
class RadialProfile:
    """Radial profile ``g`` of a sensing function (g(r) = value at radius r).

    ``g`` must accept numpy arrays of radii.  At construction the profile is
    checked numerically on a log grid: g positive and nonincreasing, and
    f(r) = r*g(r) unimodal (increasing then decreasing).  The verdict is
    stored in ``assumption_ok``; operations that need the unimodality
    assumption (the maximizer searches) raise AssumptionViolated when it
    failed, while plain integrals remain usable.
    """

    g: Callable[[np.ndarray], np.ndarray]
    sigma: Optional[float] = None
    assumption_ok: bool = field(init=False)
    assumption_msg: str = field(init=False)

    def __post_init__(self) -> None:
        ok, msg = self._check_assumption()
        object.__setattr__(self, "assumption_ok", ok)
        object.__setattr__(self, "assumption_msg", msg)

    @property
    def scale(self) -> float:
        return self.sigma if self.sigma is not None else 1.0

    def _check_assumption(self) -> tuple[bool, str]:
        s = self.scale
        r = np.geomspace(1e-6 * s, 30.0 * s, _CHECK_POINTS)
        gv = np.asarray(self.g(r), dtype=float)
        if not np.isfinite(gv).all():
            return False, "profile takes non-finite values"
        if np.any(gv <= 0.0):
            return False, "profile must be positive"
        if np.any(np.diff(gv) > 1e-12 * gv.max()):
            return False, "profile must be nonincreasing"
        f = r * gv
        sign = np.sign(np.diff(f))
        sign = sign[sign != 0]
        if len(sign) < 2:
            return False, "r * g(r) is numerically flat"
        flips = np.nonzero(np.diff(sign) != 0)[0]
        if len(flips) != 1 or sign[0] <= 0 or sign[-1] >= 0:
            return False, "r * g(r) must increase to a single maximum, then decrease"
        return True, ""

    def require_assumption(self) -> None:
        if not self.assumption_ok:
            raise AssumptionViolated(self.assumption_msg)


def gaussian_profile(sigma: float = 1.0) -> RadialProfile:
    """Profile of the unnormalized Gaussian kernel exp(-r^2 / (2 sigma^2))."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return RadialProfile(g=lambda r: np.exp(-0.5 * (r / sigma) ** 2), sigma=sigma)


def _mass(profile: RadialProfile, t: float) -> float:
    """int_0^t r g(r) dr by adaptive quadrature."""
    g = _as_scalar_fn(profile.g)
    val, _ = integrate.quad(
        lambda r: r * g(r), 0.0, t, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return val


def G(profile: RadialProfile, R: float) -> float:
    """Disk objective (1/R) * int_0^R r g(r) dr."""
    if not R > 0:
        raise ValueError("R must be positive")
    return _mass(profile, R) / R


def R_star(profile: RadialProfile) -> float:
    """The unique maximizer of G: root of R^2 g(R) = int_0^R r g(r) dr."""
    profile.require_assumption()
    g = _as_scalar_fn(profile.g)

    def w(R: float) -> float:
        return R * R * g(R) - _mass(profile, R)

    s = profile.scale
    grid = np.geomspace(1e-3 * s, 30.0 * s, 200)
    vals = np.array([w(r) for r in grid])
    neg = np.nonzero(vals < 0)[0]
    if len(neg) == 0 or neg[0] == 0 or vals[neg[0] - 1] <= 0:
        raise AssumptionViolated("no sign change found for the G stationarity equation")
    lo, hi = grid[neg[0] - 1], grid[neg[0]]
    return float(optimize.bisect(w, lo, hi, xtol=1e-10))


def alpha_n(n: int, s: np.ndarray) -> np.ndarray:
    """Radius fraction of the regular n-gon boundary in polar coordinates."""
    return np.cos(np.pi / n) / np.cos(np.pi * s / n)


def G_n(profile: RadialProfile, n: int, R: float) -> float:
    """Objective of the regular n-gon inscribed in B(0, R).

    In polar coordinates the n-gon is r <= R * alpha_n(s) over one half-edge
    sector, which gives

        G_n(R) = (pi/n) / (R sin(pi/n)) * int_0^1 int_0^{R alpha_n(s)} r g dr ds.

    (The normalization uses the inscribed perimeter 2 n R sin(pi/n); with
    g = 1 the formula reduces to the exact area/perimeter ratio
    (R/2) cos(pi/n) of the polygon.)
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    if not R > 0:
        raise ValueError("R must be positive")

    def outer(s: float) -> float:
        return _mass(profile, R * float(alpha_n(n, np.asarray(s))))

    val, _ = integrate.quad(outer, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return (np.pi / n) / (R * np.sin(np.pi / n)) * val


def R_star_n(profile: RadialProfile, n: int) -> float:
    """Maximizer of G_n, by golden-section search bracketed around R_star."""
    profile.require_assumption()
    rs = R_star(profile)
    lo, mid, hi = 0.3 * rs, rs, 3.0 * rs
    f = lambda R: -G_n(profile, n, R)
    if not (f(mid) < f(lo) and f(mid) < f(hi)):
        # widen by scanning; the profile check makes this nearly impossible
        grid = np.linspace(0.05 * rs, 10.0 * rs, 64)
        vals = [f(r) for r in grid]
        k = int(np.argmin(vals))
        if k == 0 or k == len(grid) - 1:
            raise AssumptionViolated("could not bracket a maximizer of G_n")
        lo, mid, hi = grid[k - 1], grid[k], grid[k + 1]
    res = optimize.minimize_scalar(
        f, bracket=(lo, mid, hi), method="golden", options={"xtol": 1e-8}
    )
    return float(res.x)


def amplitude_closed_form(
    y_scalar: float, lam: float, integral_phi: float, perimeter: float
) -> float:
    """Optimal single-atom amplitude: soft threshold of y by lam*P/int(phi)."""
    if not integral_phi > 0:
        raise ValueError("integral_phi must be positive")
    if not perimeter > 0:
        raise ValueError("perimeter must be positive")
    resid = abs(y_scalar) - lam * perimeter / integral_phi
    if resid <= 0.0:
        return 0.0
    return float(np.sign(y_scalar) * resid / integral_phi)


def radial_table(profile: RadialProfile, n_values) -> list[tuple[int, float, float, float]]:
    """Rows (n, R_star_n, G_n(R_star_n), |R_star_n - R_star|) for the CLI."""
    rs = R_star(profile)
    rows = []
    for n in n_values:
        rn = R_star_n(profile, int(n))
        rows.append((int(n), rn, G_n(profile, int(n), rn), abs(rn - rs)))
    return rows
