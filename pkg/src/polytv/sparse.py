"""Off-grid sparse solver: fully-corrective Frank-Wolfe loop over polygonal atoms.

Each outer iteration forms the dual field of the current residual, asks the
mesh stage + polygonal refinement for the best weighted-isoperimetric set,
stops when that ratio certifies optimality (<= 1 + stop_tol), and otherwise
inserts the set as a new atom, re-solves the amplitudes (weighted LASSO),
prunes, slides amplitudes and vertices jointly, and re-solves once more.
"""

from __future__ import annotations

import warnings
import weakref
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from matplotlib.path import Path as _MplPath

from .cheeger import (
    RefineConfig,
    cheeger_objective,
    perimeter_gradient,
    refine,
    weighted_area_gradient,
)
from .errors import (
    NoContourFound,
    NotConvergedWarning,
    OracleFallbackWarning,
    OverlapWarning,
    StalledAtNonSimple,
)
from .geometry import SimplePolygon, boundary_distance, diameter, perimeter
from .grid import (
    GridConfig,
    GridFunction,
    discretize_field,
    extract_polygon,
    solve_relaxed_cheeger,
    auto_half_width,
)
from .operator import GaussianOperator, Measurements, dual_field, unit_forward
from .quadrature import DEFAULT_QUAD, QuadratureSpec


@dataclass
class Atom:
    """Amplitude times the indicator of a simple polygon."""

    amplitude: float
    support: SimplePolygon

    def __post_init__(self) -> None:
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")


@dataclass
class AtomicFunction:
    """Finite sum of polygon indicators; the zero function when empty."""

    atoms: list[Atom] = field(default_factory=list)

    def total_variation(self) -> float:
        """Sum of |amplitude| * perimeter (atoms with essentially disjoint boundaries)."""
        return float(sum(abs(a.amplitude) * perimeter(a.support) for a in self.atoms))

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        out = np.zeros(len(pts))
        for a in self.atoms:
            path = _MplPath(np.vstack([a.support.vertices, a.support.vertices[:1]]), closed=True)
            out += a.amplitude * path.contains_points(pts)
        return out

    def rasterize(self, half_width: float, n_cells: int) -> GridFunction:
        """Cell-center sampling onto the mesh of [-R, R]^2."""
        g = GridFunction(np.zeros((n_cells, n_cells)), half_width)
        cx = g.cell_centers()
        gx, gy = np.meshgrid(cx, cx, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        g.values = self(pts).reshape(n_cells, n_cells)
        return g


# Default relative-progress stop for the atom oracle's polygonal polish; see
# frank_wolfe.  Two consecutive accepted steps gaining < 1e-7 * J end it.
ORACLE_GAIN_TOL = 1e-7


@dataclass
class FWConfig:
    """Outer-loop parameters.

    ``prune_tol`` of None resolves to 1e-10 * ||y|| / max_i P(E_i) at each
    pruning pass.  ``lasso_tol`` is relative: the amplitude solve is accepted
    when each optimality condition holds within lasso_tol * lam * P(E_i).
    """

    lam: float
    stop_tol: float = 1e-3
    max_atoms: int = 20
    max_iters: int = 50
    lasso_tol: float = 1e-8
    prune_tol: Optional[float] = None
    slide: RefineConfig = field(default_factory=lambda: RefineConfig(max_iters=30))

    def __post_init__(self) -> None:
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")
        if self.max_atoms < 1:
            raise ValueError("max_atoms must be at least 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not self.lasso_tol > 0:
            raise ValueError("lasso_tol must be positive")
        if self.prune_tol is not None and not self.prune_tol > 0:
            raise ValueError("prune_tol must be positive when given")


@dataclass
class FWRecord:
    """State at the start of stop-check k, with that check's candidate ratio.

    ``slide_improvement`` is the objective decrease the sliding step achieved
    during the iteration that produced this state (0 for the initial record).
    """

    k: int
    objective: float
    tv: float
    residual_norm: float
    cheeger_ratio: float
    n_atoms: int
    slide_improvement: float


@dataclass
class FWTrace:
    records: list[FWRecord] = field(default_factory=list)
    stopped_by: str = ""

    @property
    def iterations(self) -> int:
        """Number of completed insertion iterations."""
        return max(len(self.records) - 1, 0)


def objective(
    u: AtomicFunction,
    op: GaussianOperator,
    y: Measurements,
    lam: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    cache: Optional[_ForwardCache] = None,
) -> float:
    """0.5 ||Phi u - y||^2 + lam * sum |a_i| P(E_i)."""
    if cache is None:
        cache = _ForwardCache(op, quad)
    r = cache.matrix([a.support for a in u.atoms]) @ np.array(
        [a.amplitude for a in u.atoms]
    ) - y.values if u.atoms else -y.values
    return 0.5 * float(r @ r) + lam * u.total_variation()


class _ForwardCache:
    """Memo of unit-indicator measurement vectors keyed on polygon identity.

    SimplePolygon freezes its vertices, so a given instance always maps to
    the same vector; moved polygons are new objects and miss naturally.  The
    outer loop, the amplitude solves and the sliding step all revisit the
    same polygons many times per iteration, which the memo turns into a
    single quadrature pass each.
    """

    def __init__(self, op: GaussianOperator, quad: QuadratureSpec) -> None:
        self.op = op
        self.quad = quad
        self._memo: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()

    def unit(self, poly: SimplePolygon) -> np.ndarray:
        vec = self._memo.get(poly)
        if vec is None:
            vec = unit_forward(self.op, poly, self.quad)
            self._memo[poly] = vec
        return vec

    def matrix(self, supports: list[SimplePolygon]) -> np.ndarray:
        if not supports:
            return np.zeros((self.op.m, 0))
        return np.stack([self.unit(s) for s in supports], axis=1)


def _forward_matrix(op: GaussianOperator, supports: list[SimplePolygon], quad) -> np.ndarray:
    if not supports:
        return np.zeros((op.m, 0))
    return np.stack([unit_forward(op, s, quad) for s in supports], axis=1)


def solve_amplitudes(
    supports: list[SimplePolygon],
    op: GaussianOperator,
    y: Measurements,
    lam: float,
    quad: QuadratureSpec = DEFAULT_QUAD,
    tol: float = 1e-8,
    max_iters: int = 100000,
    cache: Optional[_ForwardCache] = None,
) -> np.ndarray:
    """Weighted LASSO over fixed supports: min_a 0.5||G a - y||^2 + lam sum P_i |a_i|.

    Proximal gradient with momentum and backtracking on the step (monotone
    restart).  Iterations stop once the subgradient conditions hold within
    tol * lam * P_i per atom: |g_i + lam P_i sign(a_i)| for active atoms,
    |g_i| <= lam P_i + tol * lam * P_i for zero ones.  Soft-warns and returns
    the current point if the budget runs out first.
    """
    n = len(supports)
    if n == 0:
        return np.zeros(0)
    g_mat = cache.matrix(supports) if cache is not None else _forward_matrix(op, supports, quad)
    cost = lam * np.array([perimeter(s) for s in supports])
    return _lasso(g_mat, y.values, cost, np.zeros(n), tol, max_iters)


def _lasso(
    g_mat: np.ndarray,
    yv: np.ndarray,
    cost: np.ndarray,
    a0: np.ndarray,
    tol: float,
    max_iters: int,
) -> np.ndarray:
    """FISTA with step backtracking and monotone restart on a fixed matrix.

    Minimizes 0.5||G a - y||^2 + sum cost_i |a_i| from the warm start ``a0``;
    the subgradient stopping tolerance is tol * cost_i per coordinate.
    """
    tol_abs = tol * cost

    def smooth_grad(a: np.ndarray) -> np.ndarray:
        return g_mat.T @ (g_mat @ a - yv)

    def smooth_val(a: np.ndarray) -> float:
        r = g_mat @ a - yv
        return 0.5 * float(r @ r)

    def total(a: np.ndarray) -> float:
        return smooth_val(a) + float(cost @ np.abs(a))

    def is_optimal(a: np.ndarray) -> bool:
        g = smooth_grad(a)
        active = a != 0.0
        if np.any(np.abs(g[active] + cost[active] * np.sign(a[active])) > tol_abs[active]):
            return False
        return not np.any(np.abs(g[~active]) > cost[~active] + tol_abs[~active])

    lip = float(np.linalg.norm(g_mat, 2)) ** 2
    step_l = max(lip / 4.0, 1e-300)  # low start so backtracking engages
    a = np.asarray(a0, dtype=float).copy()
    z = a.copy()
    t_mom = 1.0
    f_prev = total(a)
    for _ in range(max_iters):
        if is_optimal(a):
            return a
        gz = smooth_grad(z)
        fz = smooth_val(z)
        while True:
            a_new = z - gz / step_l
            a_new = np.sign(a_new) * np.maximum(np.abs(a_new) - cost / step_l, 0.0)
            d = a_new - z
            if smooth_val(a_new) <= fz + float(gz @ d) + 0.5 * step_l * float(d @ d) + 1e-15:
                break
            step_l *= 2.0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        z = a_new + ((t_mom - 1.0) / t_new) * (a_new - a)
        f_new = total(a_new)
        if f_new > f_prev:  # restart momentum on any objective increase
            z = a_new.copy()
            t_new = 1.0
        a = a_new
        t_mom = t_new
        f_prev = f_new
    warnings.warn(
        "amplitude solve hit its iteration budget before meeting the "
        "optimality tolerance",
        NotConvergedWarning,
    )
    return a


def sliding_step(
    u: AtomicFunction,
    op: GaussianOperator,
    y: Measurements,
    lam: float,
    cfg: RefineConfig = RefineConfig(max_iters=30),
    quad: QuadratureSpec = DEFAULT_QUAD,
    cache: Optional[_ForwardCache] = None,
    trace: Optional[list] = None,
    lasso_tol: float = 1e-8,
) -> AtomicFunction:
    """Local joint descent on amplitudes and vertices, alternating blocks.

    Each iteration re-solves the amplitudes exactly (weighted LASSO on the
    cached forward matrix, warm-started), then takes one Armijo-backtracked
    step on all vertex blocks along the shape gradient of T: theta_i = a_i *
    d(int_Ei residual-field) + lam |a_i| * dP_i.  The exact amplitude block
    costs no new quadrature, so every measurement-vector evaluation goes into
    moving the supports; the objective never increases.  Trial steps that
    break simplicity are halved.

    Terminates on a scale-free gradient test, when backtracking fails, or --
    with cfg.gain_tol > 0 -- after two consecutive iterations that each
    decrease T by less than gain_tol * T.  When ``trace`` is a list, a row
    (iteration, T, accepted step) is appended per iteration.
    """
    if not u.atoms:
        return u
    if cache is None:
        cache = _ForwardCache(op, quad)
    yv = y.values
    amps = np.array([a.amplitude for a in u.atoms])
    polys = [a.support for a in u.atoms]
    n_atoms = len(polys)

    def total(amps_c, g_c, pers_c) -> float:
        r = g_c @ amps_c - yv
        return 0.5 * float(r @ r) + lam * float(pers_c @ np.abs(amps_c))

    g_mat = cache.matrix(polys)
    pers = np.array([perimeter(p) for p in polys])
    amps = _lasso(g_mat, yv, lam * pers, amps, lasso_tol, 100000)
    t_cur = total(amps, g_mat, pers)
    alpha_prev = None
    stalled = 0
    for it in range(1, cfg.max_iters + 1):
        r = g_mat @ amps - yv
        resid_field = dual_field(op, r)
        thetas = [
            amps[i] * weighted_area_gradient(polys[i], resid_field, quad)
            + lam * abs(amps[i]) * perimeter_gradient(polys[i])
            for i in range(n_atoms)
        ]
        diams = np.array([diameter(p.vertices) for p in polys])
        g2 = float(sum((t * t).sum() for t in thetas))
        move = max(np.linalg.norm(t, axis=1).max() for t in thetas)
        if move <= 0.0:
            break
        alpha0 = cfg.step_init * diams.max() / move
        if alpha0 * g2 < cfg.grad_tol * max(t_cur, 1e-300):
            break
        alpha = alpha0 if alpha_prev is None else min(alpha0, 4.0 * alpha_prev)
        accepted = False
        while alpha >= cfg.min_step:
            try:
                polys_new = [
                    SimplePolygon(polys[i].vertices - alpha * thetas[i])
                    for i in range(n_atoms)
                ]
            except ValueError:
                alpha *= cfg.step_shrink
                continue
            g_new = cache.matrix(polys_new)
            pers_new = np.array([perimeter(p) for p in polys_new])
            t_new = total(amps, g_new, pers_new)
            if t_new <= t_cur - cfg.armijo_c * alpha * g2:
                accepted = True
                alpha_prev = alpha
                break
            alpha *= cfg.step_shrink
        if not accepted:
            if trace is not None:
                trace.append((it, t_cur, 0.0))
            break
        polys, g_mat, pers = polys_new, g_new, pers_new
        amps = _lasso(g_mat, yv, lam * pers, amps, lasso_tol, 100000)
        t_done = total(amps, g_mat, pers)
        rel_dec = (t_cur - t_done) / max(t_cur, 1e-300)
        t_cur = t_done
        if trace is not None:
            trace.append((it, t_cur, alpha))
        if cfg.gain_tol > 0.0 and rel_dec < cfg.gain_tol:
            stalled += 1
            if stalled >= 2:
                break
        else:
            stalled = 0
    return AtomicFunction([Atom(float(a), p) for a, p in zip(amps, polys)])


def _prune(
    atoms: list[Atom], cfg: FWConfig, ynorm: float
) -> list[Atom]:
    if not atoms:
        return atoms
    if cfg.prune_tol is not None:
        thresh = cfg.prune_tol
    else:
        thresh = 1e-10 * ynorm / max(perimeter(a.support) for a in atoms)
    return [a for a in atoms if abs(a.amplitude) >= thresh]


def _warn_on_close_boundaries(atoms: list[Atom]) -> None:
    for i in range(len(atoms)):
        for j in range(i + 1, len(atoms)):
            di = diameter(atoms[i].support.vertices)
            dj = diameter(atoms[j].support.vertices)
            if boundary_distance(atoms[i].support, atoms[j].support) < 1e-6 * max(di, dj):
                warnings.warn(
                    f"atom boundaries {i} and {j} nearly touch; the additive "
                    "TV evaluation sum |a_i| P(E_i) may overestimate",
                    OverlapWarning,
                )
                return


def _atom_oracle(
    eta_field,
    half_width: float,
    grid_cfg: GridConfig,
    refine_cfg: RefineConfig,
    quad: QuadratureSpec,
) -> tuple[SimplePolygon, float]:
    """Mesh relaxation, contour extraction, then polygonal ascent."""
    bar = discretize_field(eta_field, half_width, grid_cfg.n_cells, quad)
    relaxed = solve_relaxed_cheeger(bar, grid_cfg.pd)
    if grid_cfg.refine_once:
        bar = discretize_field(eta_field, half_width, 2 * grid_cfg.n_cells, quad)
        relaxed = solve_relaxed_cheeger(bar, grid_cfg.pd)
    poly, _ = extract_polygon(relaxed, eta_field, grid_cfg.n_vertices, quad)
    try:
        poly = refine(poly, eta_field, refine_cfg, quad)
    except StalledAtNonSimple:
        warnings.warn(
            "polygonal refinement stalled on self-intersections; using the "
            "mesh-stage polygon",
            OracleFallbackWarning,
        )
    return poly, cheeger_objective(poly, eta_field, quad)


def frank_wolfe(
    op: GaussianOperator,
    y: Measurements,
    cfg: FWConfig,
    grid_cfg: GridConfig = GridConfig(),
    refine_cfg: Optional[RefineConfig] = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> tuple[AtomicFunction, FWTrace]:
    """Run the outer loop until the Cheeger certificate, or a budget, stops it.

    Per iteration: dual field of the residual, atom oracle, certificate check
    against 1 + stop_tol, zero-amplitude insertion, amplitude solve, prune,
    sliding step, amplitude re-solve, prune.  The trace gains one record per
    stop check (so records[0] is the empty state) and the objective column
    strictly decreases until the stop.  ``stopped_by`` is one of
    "certificate", "max_iters", "max_atoms".

    ``refine_cfg`` of None resolves to RefineConfig(gain_tol=ORACLE_GAIN_TOL):
    the oracle only needs a near-maximal atom (the sliding step keeps moving
    its vertices afterwards), so its polish stops on stalled J progress
    instead of running to the criticality tolerance.

    The mesh half-width is fixed the first time a nonzero residual appears,
    so every atom lives in one common ball.
    """
    if refine_cfg is None:
        refine_cfg = RefineConfig(gain_tol=ORACLE_GAIN_TOL)
    yv = y.values
    ynorm = float(np.linalg.norm(yv))
    lam = cfg.lam
    atoms: list[Atom] = []
    trace = FWTrace()
    half_width = grid_cfg.half_width
    slide_gain = 0.0
    fwd = _ForwardCache(op, quad)

    for k in range(cfg.max_iters + 1):
        supports = [a.support for a in atoms]
        amps = np.array([a.amplitude for a in atoms])
        g_mat = fwd.matrix(supports)
        r = g_mat @ amps - yv if atoms else -yv
        tv = float(sum(abs(a.amplitude) * perimeter(a.support) for a in atoms))
        t_cur = 0.5 * float(r @ r) + lam * tv
        resid_norm = float(np.linalg.norm(r))

        candidate = None
        ratio = 0.0
        if resid_norm > 0.0:
            eta_field = dual_field(op, -r / lam)
            if half_width is None:
                half_width = auto_half_width(eta_field)
            try:
                candidate, ratio = _atom_oracle(
                    eta_field, half_width, grid_cfg, refine_cfg, quad
                )
            except NoContourFound:
                candidate, ratio = None, 0.0

        trace.records.append(
            FWRecord(k, t_cur, tv, resid_norm, ratio, len(atoms), slide_gain)
        )
        if ratio <= 1.0 + cfg.stop_tol:
            trace.stopped_by = "certificate"
            break
        if len(atoms) >= cfg.max_atoms:
            trace.stopped_by = "max_atoms"
            warnings.warn(
                "atom budget exhausted before the stopping certificate held",
                NotConvergedWarning,
            )
            break
        if k == cfg.max_iters:
            trace.stopped_by = "max_iters"
            warnings.warn(
                "outer iteration budget exhausted before the stopping "
                "certificate held",
                NotConvergedWarning,
            )
            break

        atoms.append(Atom(0.0, candidate))
        supports = [a.support for a in atoms]
        amps = solve_amplitudes(supports, op, y, lam, quad, tol=cfg.lasso_tol, cache=fwd)
        atoms = _prune(
            [Atom(float(a), s) for a, s in zip(amps, supports)], cfg, ynorm
        )

        before_slide = objective(AtomicFunction(atoms), op, y, lam, quad, cache=fwd)
        slid = sliding_step(
            AtomicFunction(atoms), op, y, lam, cfg.slide, quad,
            cache=fwd, lasso_tol=cfg.lasso_tol,
        )
        slide_gain = before_slide - objective(slid, op, y, lam, quad, cache=fwd)

        supports = [a.support for a in slid.atoms]
        amps = solve_amplitudes(supports, op, y, lam, quad, tol=cfg.lasso_tol, cache=fwd)
        atoms = _prune(
            [Atom(float(a), s) for a, s in zip(amps, supports)], cfg, ynorm
        )
        _warn_on_close_boundaries(atoms)

    return AtomicFunction(atoms), trace
