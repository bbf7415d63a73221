"""Atomic representation, weighted LASSO, sliding step, and the outer loop."""

import warnings

import numpy as np
import pytest

from helpers import TIGHT_QUAD, random_star_polygon
from polytv import (
    Atom,
    AtomicFunction,
    FWConfig,
    GaussianOperator,
    GridConfig,
    Measurements,
    PrimalDualConfig,
    QuadratureSpec,
    RefineConfig,
    SimplePolygon,
    dual_field,
    frank_wolfe,
    grid_centers,
    objective,
    perimeter,
    perimeter_gradient,
    regular_ngon,
    sliding_step,
    solve_amplitudes,
    unit_forward,
    weighted_area_gradient,
)
from polytv.errors import NotConvergedWarning, OverlapWarning
from polytv.phantoms import disk, rectangle
from polytv.sparse import _ForwardCache, _prune, _warn_on_close_boundaries

QUAD = QuadratureSpec(refine_tol=1e-9)


def small_op(side=3, sigma=0.4, extent=0.7):
    return GaussianOperator(centers=grid_centers(side, extent), sigma=sigma)


def ista_reference(g_mat, yv, cost, iters=200_000):
    """Plain fixed-step ISTA, an independent minimizer of the same LASSO."""
    step = 1.0 / np.linalg.norm(g_mat, 2) ** 2
    a = np.zeros(g_mat.shape[1])
    for _ in range(iters):
        z = a - step * (g_mat.T @ (g_mat @ a - yv))
        a_new = np.sign(z) * np.maximum(np.abs(z) - step * cost, 0.0)
        if np.abs(a_new - a).max() < 1e-14:
            return a_new
        a = a_new
    return a


# --------------------------------------------------------------- atomic images


def test_atomic_function_membership_and_tv():
    atoms = disk((0.0, 0.0), 0.5, 2.0, n_vertices=128) + rectangle(
        0.6, 0.6, 0.9, 0.9, -1.0
    )
    u = AtomicFunction(atoms)
    pts = np.array([[0.0, 0.0], [0.75, 0.75], [0.55, 0.0], [-2.0, 0.0]])
    vals = u(pts)
    assert vals[0] == pytest.approx(2.0)
    assert vals[1] == pytest.approx(-1.0)
    assert vals[2] == pytest.approx(0.0)
    assert vals[3] == pytest.approx(0.0)
    want_tv = 2.0 * perimeter(atoms[0].support) + 1.0 * perimeter(atoms[1].support)
    assert u.total_variation() == pytest.approx(want_tv, rel=1e-12)
    assert AtomicFunction([]).total_variation() == 0.0


def test_rasterize_cell_centers():
    u = AtomicFunction(rectangle(-1.0, -1.0, 0.0, 0.0, 3.0))
    g = u.rasterize(1.0, 4)
    want = np.zeros((4, 4))
    want[:2, :2] = 3.0
    assert np.allclose(g.values, want)


def test_objective_of_zero_function_is_data_energy():
    op = small_op()
    y = Measurements(np.linspace(-1.0, 1.0, op.m))
    val = objective(AtomicFunction([]), op, y, lam=0.3, quad=QUAD)
    assert val == pytest.approx(0.5 * float(y.values @ y.values), rel=1e-14)


# -------------------------------------------------------------- weighted LASSO


def test_solve_amplitudes_single_atom_soft_threshold():
    """One atom reduces to a scalar soft threshold with weight lam * P."""
    op = small_op()
    poly = regular_ngon((0.1, 0.0), 0.45, 24)
    g = unit_forward(op, poly, QUAD)
    rng = np.random.default_rng(101)
    y = Measurements(0.8 * g + 0.01 * rng.standard_normal(op.m))
    for lam in (1e-4, 1e-2):
        a = solve_amplitudes([poly], op, y, lam, QUAD, tol=1e-12)
        corr = float(g @ y.values)
        want = np.sign(corr) * max(
            abs(corr) - lam * perimeter(poly), 0.0
        ) / float(g @ g)
        assert a[0] == pytest.approx(want, rel=1e-9)


def test_solve_amplitudes_zero_below_threshold():
    op = small_op()
    poly = regular_ngon((0.0, 0.0), 0.4, 16)
    g = unit_forward(op, poly, QUAD)
    lam_big = 2.0 * float(np.abs(g).sum())  # dominates any correlation with |y|<=1
    y = Measurements(np.clip(g, -1.0, 1.0))
    a = solve_amplitudes([poly], op, y, lam_big, QUAD)
    assert a[0] == 0.0


def test_solve_amplitudes_matches_independent_ista():
    op = small_op(side=4, sigma=0.35)
    rng = np.random.default_rng(107)
    polys = [
        random_star_polygon(rng, radius=0.35, center=c)
        for c in [(-0.4, -0.3), (0.45, -0.35), (0.0, 0.45)]
    ]
    g_mat = np.stack([unit_forward(op, p, QUAD) for p in polys], axis=1)
    y = Measurements(g_mat @ np.array([1.2, -0.7, 0.4]) + 0.05 * rng.standard_normal(op.m))
    lam = 0.02
    cost = lam * np.array([perimeter(p) for p in polys])
    ref = ista_reference(g_mat, y.values, cost)
    got = solve_amplitudes(polys, op, y, lam, QUAD, tol=1e-12)
    assert np.allclose(got, ref, atol=1e-7)

    def lasso_obj(a):
        r = g_mat @ a - y.values
        return 0.5 * float(r @ r) + float(cost @ np.abs(a))

    assert lasso_obj(got) <= lasso_obj(ref) + 1e-12


def test_solve_amplitudes_duplicate_supports_share_the_optimum():
    """Two copies of one support: the solution value matches the single atom."""
    op = small_op()
    poly = regular_ngon((0.0, 0.1), 0.5, 20)
    g = unit_forward(op, poly, QUAD)
    y = Measurements(1.5 * g)
    lam = 0.01
    single = solve_amplitudes([poly], op, y, lam, QUAD, tol=1e-12)
    double = solve_amplitudes([poly, poly], op, y, lam, QUAD, tol=1e-12)

    def value(amps, supports):
        r = np.stack([unit_forward(op, s, QUAD) for s in supports], 1) @ amps - y.values
        return 0.5 * float(r @ r) + lam * float(
            sum(perimeter(s) * abs(a) for s, a in zip(supports, amps))
        )

    assert value(double, [poly, poly]) == pytest.approx(
        value(single, [poly]), rel=1e-9
    )
    assert double.sum() == pytest.approx(single[0], rel=1e-6)


def test_solve_amplitudes_empty():
    op = small_op()
    out = solve_amplitudes([], op, Measurements(np.zeros(op.m)), 1.0)
    assert out.shape == (0,)


def test_solve_amplitudes_warns_on_budget():
    op = small_op()
    poly = regular_ngon((0.0, 0.0), 0.5, 12)
    y = Measurements(np.ones(op.m))
    with pytest.warns(NotConvergedWarning):
        solve_amplitudes([poly], op, y, 1e-6, QUAD, tol=1e-16, max_iters=3)


# ---------------------------------------------------------------- forward cache


class CountingOp:
    """Duck-typed operator that counts field evaluations."""

    def __init__(self, op):
        self._op = op
        self.centers = op.centers
        self.sigma = op.sigma
        self.m = op.m
        self.calls = 0

    def phi(self, pts):
        self.calls += 1
        return self._op.phi(pts)


def test_forward_cache_memoizes_on_identity():
    op = CountingOp(small_op())
    cache = _ForwardCache(op, QUAD)
    poly = regular_ngon((0.0, 0.0), 0.5, 16)
    v1 = cache.unit(poly)
    after_first = op.calls
    v2 = cache.unit(poly)
    assert op.calls == after_first  # second lookup is free
    assert v1 is v2

    mat = cache.matrix([poly, poly])
    assert op.calls == after_first
    assert np.allclose(mat[:, 0], v1)

    # an equal polygon built separately is a different key
    clone = regular_ngon((0.0, 0.0), 0.5, 16)
    cache.unit(clone)
    assert op.calls > after_first

    assert cache.matrix([]).shape == (op.m, 0)


# ---------------------------------------------------------------- sliding step


def two_atom_scene():
    op = small_op(side=4, sigma=0.35)
    truth = AtomicFunction(
        disk((-0.35, 0.0), 0.3, 1.0, n_vertices=24)
        + rectangle(0.15, -0.25, 0.6, 0.35, -0.8)
    )
    y = forward_measurements(op, truth)
    return op, truth, y


def forward_measurements(op, u):
    from polytv import forward

    return forward(op, u, QUAD)


def test_sliding_step_never_increases_objective():
    op, truth, y = two_atom_scene()
    lam = 5e-4
    # start from perturbed supports and wrong amplitudes
    start = AtomicFunction(
        [
            Atom(0.6, regular_ngon((-0.30, 0.05), 0.24, 24)),
            Atom(-0.5, rectangle(0.20, -0.2, 0.62, 0.30, 1.0)[0].support),
        ]
    )
    rows = []
    t0 = objective(start, op, y, lam, QUAD)
    slid = sliding_step(start, op, y, lam, RefineConfig(max_iters=25), QUAD, trace=rows)
    t1 = objective(slid, op, y, lam, QUAD)
    assert t1 <= t0 + 1e-12
    assert t1 < 0.5 * t0  # the engineered start leaves plenty to gain
    t_col = np.array([r[1] for r in rows])
    assert np.all(np.diff(t_col) <= 1e-12)
    assert len(slid.atoms) == 2


def test_sliding_step_gradient_matches_fd():
    """The per-vertex descent direction of T matches central differences."""
    op, _, y = two_atom_scene()
    lam = 2e-3
    poly = regular_ngon((-0.3, 0.05), 0.26, 10)
    amp = 0.7
    quad = QuadratureSpec(refine_tol=1e-11)

    def t_of(vertices):
        u = AtomicFunction([Atom(amp, SimplePolygon(vertices))])
        return objective(u, op, y, lam, quad)

    g = unit_forward(op, poly, quad)
    r = amp * g - y.values
    theta = amp * weighted_area_gradient(
        poly, dual_field(op, r), quad
    ) + lam * abs(amp) * perimeter_gradient(poly)

    h = 1e-6
    fd = np.zeros_like(theta)
    for j in range(poly.n):
        for c in range(2):
            vp = poly.vertices.copy()
            vp[j, c] += h
            vm = poly.vertices.copy()
            vm[j, c] -= h
            fd[j, c] = (t_of(vp) - t_of(vm)) / (2.0 * h)
    assert np.allclose(theta, fd, atol=1e-4 * max(np.abs(fd).max(), 1.0))


def test_sliding_step_empty_input_is_identity():
    op = small_op()
    u = AtomicFunction([])
    assert sliding_step(u, op, Measurements(np.zeros(op.m)), 0.1) is u


# -------------------------------------------------------------------- pruning


def test_prune_thresholds():
    poly = regular_ngon((0.0, 0.0), 0.5, 8)
    atoms = [Atom(1.0, poly), Atom(1e-12, poly), Atom(-2e-3, poly)]
    cfg = FWConfig(lam=0.1, prune_tol=1e-2)
    assert [a.amplitude for a in _prune(atoms, cfg, ynorm=1.0)] == [1.0]
    cfg_auto = FWConfig(lam=0.1)  # default: 1e-10 * ||y|| / max perimeter
    kept = _prune(atoms, cfg_auto, ynorm=1.0)
    assert [a.amplitude for a in kept] == [1.0, -2e-3]


def test_overlap_warning_on_touching_boundaries():
    a = Atom(1.0, regular_ngon((0.0, 0.0), 0.5, 16))
    b = Atom(1.0, regular_ngon((0.3, 0.0), 0.5, 16))  # boundaries cross
    with pytest.warns(OverlapWarning):
        _warn_on_close_boundaries([a, b])
    far = Atom(1.0, regular_ngon((2.0, 0.0), 0.5, 16))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        _warn_on_close_boundaries([a, far])


# ------------------------------------------------------------------ outer loop


def test_frank_wolfe_zero_data_stops_immediately():
    op = small_op()
    y = Measurements(np.zeros(op.m))
    u, trace = frank_wolfe(op, y, FWConfig(lam=0.1))
    assert u.atoms == []
    assert trace.iterations == 0
    assert trace.stopped_by == "certificate"
    assert trace.records[0].objective == 0.0
    assert trace.records[0].cheeger_ratio == 0.0


def test_frank_wolfe_atom_budget_warns():
    op, truth, y = two_atom_scene()
    grid_cfg = GridConfig(
        n_cells=32, n_vertices=16, pd=PrimalDualConfig(max_iters=20000)
    )
    cfg = FWConfig(lam=1e-3, max_atoms=1, slide=RefineConfig(max_iters=5))
    with pytest.warns(NotConvergedWarning, match="atom budget"):
        u, trace = frank_wolfe(op, y, cfg, grid_cfg, quad=QUAD)
    assert trace.stopped_by == "max_atoms"
    assert len(u.atoms) == 1
    objs = [r.objective for r in trace.records]
    assert objs[-1] < objs[0]


def test_fw_config_validation():
    with pytest.raises(ValueError):
        FWConfig(lam=0.0)
    with pytest.raises(ValueError):
        FWConfig(lam=1.0, max_atoms=0)
    with pytest.raises(ValueError):
        FWConfig(lam=1.0, prune_tol=-1.0)
