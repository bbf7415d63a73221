"""Run configuration: flat ``section.key = value`` text files.

Grammar: one assignment per line, ``#`` starts a comment, blank lines are
skipped.  Keys are dotted (section.name); values are typed per key (float,
int, bool true/false, string, or a space-separated list).  Phantom atoms use
numbered keys::

    phantom.atom1 = 1.0 disk 0.0 0.0 0.32
    phantom.atom2 = -0.8 rect 0.1 -0.75 0.8 -0.3
    phantom.atom3 = 0.6 ngon 0.45 0.5 0.3 5
    phantom.atom4 = 0.5 annulus 0.0 0.0 0.4 0.7

i.e. ``<amplitude> <shape> <shape args...>`` with shapes
disk(cx cy r [n]), rect(xmin ymin xmax ymax), ngon(cx cy r n [phase]),
annulus(cx cy r_in r_out [n]).

Unknown keys, duplicate keys, malformed values, and inconsistent combinations
(noise without a seed, no lambda specification for solver commands) raise
ConfigError.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cheeger import RefineConfig
from .errors import ConfigError
from .grid import GridConfig, PrimalDualConfig
from .operator import GaussianOperator, grid_centers, lambda_from_noise
from .phantoms import annulus, disk, ngon, rectangle
from .quadrature import QuadratureSpec
from .sparse import ORACLE_GAIN_TOL, Atom, AtomicFunction, FWConfig


@dataclass
class RunConfig:
    """Parsed configuration; module configs are assembled by the builders."""

    operator_half_width: float = 1.0
    operator_grid: int = 16
    operator_sigma: float = 0.1
    noise_tau: float = 0.0
    noise_seed: Optional[int] = None
    lam: Optional[float] = None
    lam_scale: Optional[float] = None
    stop_tol: float = 1e-3
    max_atoms: int = 20
    max_iters: int = 50
    lasso_tol: float = 1e-8
    prune_tol: Optional[float] = None
    grid_n_cells: int = 64
    grid_half_width: Optional[float] = None
    grid_refine_once: bool = False
    oracle_n_vertices: int = 32
    pd_max_iters: int = 100000
    pd_tau: Optional[float] = None
    pd_sigma_step: Optional[float] = None
    pd_gap_tol: float = 1e-7
    refine_max_iters: int = 200
    refine_step_init: float = 0.1
    refine_armijo_c: float = 1e-4
    refine_step_shrink: float = 0.5
    refine_grad_tol: float = 1e-6
    refine_min_step: float = 1e-12
    refine_gain_tol: Optional[float] = None
    slide_max_iters: int = 30
    quad_triangle_rule_order: int = 7
    quad_edge_rule_order: int = 5
    quad_refine_tol: float = 1e-6
    quad_max_subdivision_depth: int = 10
    phantom_atoms: list = field(default_factory=list)
    out_dir: str = "out"
    cheeger_preset: str = "gaussian"
    cheeger_sigma: float = 1.0
    cheeger_coefficients: Optional[np.ndarray] = None
    baseline_n_cells: int = 64
    baseline_half_width: Optional[float] = None
    radial_profile: str = "gaussian"
    radial_sigma: float = 1.0
    radial_n_values: list = field(default_factory=lambda: [4, 8, 16, 32, 64])
    radial_full_pipeline: bool = False
    radial_y: float = 3.0
    radial_lambda: float = 0.2


def _to_float(s: str) -> float:
    try:
        return float(s)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {s!r}") from exc


def _to_int(s: str) -> int:
    try:
        return int(s)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {s!r}") from exc


def _to_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected true/false, got {s!r}")


# key -> (RunConfig attribute, converter)
_KEYS = {
    "operator.half_width": ("operator_half_width", _to_float),
    "operator.grid": ("operator_grid", _to_int),
    "operator.sigma": ("operator_sigma", _to_float),
    "noise.tau": ("noise_tau", _to_float),
    "noise.seed": ("noise_seed", _to_int),
    "solver.lambda": ("lam", _to_float),
    "solver.lambda_scale": ("lam_scale", _to_float),
    "solver.stop_tol": ("stop_tol", _to_float),
    "solver.max_atoms": ("max_atoms", _to_int),
    "solver.max_iters": ("max_iters", _to_int),
    "solver.lasso_tol": ("lasso_tol", _to_float),
    "solver.prune_tol": ("prune_tol", _to_float),
    "grid.n_cells": ("grid_n_cells", _to_int),
    "grid.half_width": ("grid_half_width", _to_float),
    "grid.refine_once": ("grid_refine_once", _to_bool),
    "oracle.n_vertices": ("oracle_n_vertices", _to_int),
    "pd.max_iters": ("pd_max_iters", _to_int),
    "pd.tau": ("pd_tau", _to_float),
    "pd.sigma_step": ("pd_sigma_step", _to_float),
    "pd.gap_tol": ("pd_gap_tol", _to_float),
    "refine.max_iters": ("refine_max_iters", _to_int),
    "refine.step_init": ("refine_step_init", _to_float),
    "refine.armijo_c": ("refine_armijo_c", _to_float),
    "refine.step_shrink": ("refine_step_shrink", _to_float),
    "refine.grad_tol": ("refine_grad_tol", _to_float),
    "refine.min_step": ("refine_min_step", _to_float),
    "refine.gain_tol": ("refine_gain_tol", _to_float),
    "slide.max_iters": ("slide_max_iters", _to_int),
    "quad.triangle_rule_order": ("quad_triangle_rule_order", _to_int),
    "quad.edge_rule_order": ("quad_edge_rule_order", _to_int),
    "quad.refine_tol": ("quad_refine_tol", _to_float),
    "quad.max_subdivision_depth": ("quad_max_subdivision_depth", _to_int),
    "output.dir": ("out_dir", str),
    "cheeger.preset": ("cheeger_preset", str),
    "cheeger.sigma": ("cheeger_sigma", _to_float),
    "baseline.n_cells": ("baseline_n_cells", _to_int),
    "baseline.half_width": ("baseline_half_width", _to_float),
    "radial.profile": ("radial_profile", str),
    "radial.sigma": ("radial_sigma", _to_float),
    "radial.full_pipeline": ("radial_full_pipeline", _to_bool),
    "radial.y": ("radial_y", _to_float),
    "radial.lambda": ("radial_lambda", _to_float),
}

_SHAPES = {"disk", "rect", "ngon", "annulus"}


def _parse_phantom_atom(value: str) -> list[Atom]:
    parts = value.split()
    if len(parts) < 2:
        raise ConfigError(f"phantom atom needs '<amplitude> <shape> ...', got {value!r}")
    amp = _to_float(parts[0])
    shape = parts[1].lower()
    args = [_to_float(p) for p in parts[2:]]
    try:
        if shape == "disk":
            if len(args) == 3:
                return disk((args[0], args[1]), args[2], amp)
            if len(args) == 4:
                return disk((args[0], args[1]), args[2], amp, int(args[3]))
        elif shape == "rect":
            if len(args) == 4:
                return rectangle(args[0], args[1], args[2], args[3], amp)
        elif shape == "ngon":
            if len(args) == 4:
                return ngon((args[0], args[1]), args[2], int(args[3]), amp)
            if len(args) == 5:
                return ngon((args[0], args[1]), args[2], int(args[3]), amp, args[4])
        elif shape == "annulus":
            if len(args) == 4:
                return annulus((args[0], args[1]), args[2], args[3], amp)
            if len(args) == 5:
                return annulus((args[0], args[1]), args[2], args[3], amp, int(args[4]))
        else:
            raise ConfigError(f"unknown shape {shape!r} (choose from {sorted(_SHAPES)})")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid phantom atom {value!r}: {exc}") from exc
    raise ConfigError(f"wrong number of arguments for shape {shape!r}: {value!r}")


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    seen: set[str] = set()
    phantom_entries: list[tuple[int, list[Atom]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key == "radial.n_values":
            cfg.radial_n_values = [_to_int(p) for p in value.split()]
            continue
        if key == "cheeger.coefficients":
            cfg.cheeger_coefficients = np.array([_to_float(p) for p in value.split()])
            continue
        if key.startswith("phantom.atom"):
            idx = _to_int(key[len("phantom.atom"):])
            phantom_entries.append((idx, _parse_phantom_atom(value)))
            continue
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = _KEYS[key]
        setattr(cfg, attr, conv(value))
    phantom_entries.sort(key=lambda kv: kv[0])
    cfg.phantom_atoms = [a for _, atoms in phantom_entries for a in atoms]
    _validate(cfg)
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text)


def _validate(cfg: RunConfig) -> None:
    if cfg.operator_grid < 1:
        raise ConfigError("operator.grid must be >= 1")
    for name, v in (
        ("operator.half_width", cfg.operator_half_width),
        ("operator.sigma", cfg.operator_sigma),
        ("radial.sigma", cfg.radial_sigma),
        ("cheeger.sigma", cfg.cheeger_sigma),
    ):
        if not v > 0:
            raise ConfigError(f"{name} must be positive")
    if cfg.noise_tau < 0:
        raise ConfigError("noise.tau must be >= 0")
    if cfg.noise_tau > 0 and cfg.noise_seed is None:
        raise ConfigError("noise.seed is required when noise.tau > 0")
    if cfg.lam is not None and cfg.lam_scale is not None:
        raise ConfigError("give solver.lambda or solver.lambda_scale, not both")
    if cfg.lam is not None and not cfg.lam > 0:
        raise ConfigError("solver.lambda must be positive")
    if cfg.lam_scale is not None:
        if not cfg.lam_scale > 0:
            raise ConfigError("solver.lambda_scale must be positive")
        if cfg.noise_tau == 0:
            raise ConfigError("solver.lambda_scale needs noise.tau > 0")
    if cfg.grid_n_cells < 2:
        raise ConfigError("grid.n_cells must be >= 2")
    if cfg.oracle_n_vertices < 3:
        raise ConfigError("oracle.n_vertices must be >= 3")


def build_operator(cfg: RunConfig) -> GaussianOperator:
    centers = grid_centers(cfg.operator_grid, cfg.operator_half_width)
    return GaussianOperator(centers=centers, sigma=cfg.operator_sigma)


def build_phantom(cfg: RunConfig) -> AtomicFunction:
    return AtomicFunction(list(cfg.phantom_atoms))


def build_quad(cfg: RunConfig) -> QuadratureSpec:
    return QuadratureSpec(
        triangle_rule_order=cfg.quad_triangle_rule_order,
        edge_rule_order=cfg.quad_edge_rule_order,
        refine_tol=cfg.quad_refine_tol,
        max_subdivision_depth=cfg.quad_max_subdivision_depth,
    )


def build_grid_config(cfg: RunConfig) -> GridConfig:
    return GridConfig(
        n_cells=cfg.grid_n_cells,
        half_width=cfg.grid_half_width,
        n_vertices=cfg.oracle_n_vertices,
        pd=PrimalDualConfig(
            max_iters=cfg.pd_max_iters,
            tau=cfg.pd_tau,
            sigma_step=cfg.pd_sigma_step,
            gap_tol=cfg.pd_gap_tol,
        ),
        refine_once=cfg.grid_refine_once,
    )


def build_refine_config(cfg: RunConfig, oracle: bool = False) -> RefineConfig:
    """refine.gain_tol of None picks the context default: the Frank-Wolfe
    oracle stops on stalled progress (ORACLE_GAIN_TOL), the standalone
    cheeger command polishes to grad_tol (0)."""
    gain_tol = cfg.refine_gain_tol
    if gain_tol is None:
        gain_tol = ORACLE_GAIN_TOL if oracle else 0.0
    return RefineConfig(
        max_iters=cfg.refine_max_iters,
        step_init=cfg.refine_step_init,
        armijo_c=cfg.refine_armijo_c,
        step_shrink=cfg.refine_step_shrink,
        grad_tol=cfg.refine_grad_tol,
        min_step=cfg.refine_min_step,
        gain_tol=gain_tol,
    )


def build_slide_config(cfg: RunConfig) -> RefineConfig:
    slide = build_refine_config(cfg)
    slide.max_iters = cfg.slide_max_iters
    return slide


def lambda_value(cfg: RunConfig, m: int) -> float:
    """Explicit solver.lambda, or the noise-calibrated value."""
    if cfg.lam is not None:
        return cfg.lam
    if cfg.lam_scale is not None:
        return lambda_from_noise(cfg.lam_scale, m, cfg.noise_tau)
    raise ConfigError("config must set solver.lambda or solver.lambda_scale")


def build_fw_config(cfg: RunConfig, lam: float) -> FWConfig:
    return FWConfig(
        lam=lam,
        stop_tol=cfg.stop_tol,
        max_atoms=cfg.max_atoms,
        max_iters=cfg.max_iters,
        lasso_tol=cfg.lasso_tol,
        prune_tol=cfg.prune_tol,
        slide=build_slide_config(cfg),
    )


def draw_noise(cfg: RunConfig, m: int, seed_override: Optional[int] = None):
    """tau-scaled Gaussian vector from the seeded PCG64 generator (or zeros)."""
    if cfg.noise_tau == 0:
        return np.zeros(m)
    seed = seed_override if seed_override is not None else cfg.noise_seed
    if seed is None:
        raise ConfigError("noise.seed is required when noise.tau > 0")
    gen = np.random.Generator(np.random.PCG64(seed))
    return cfg.noise_tau * gen.standard_normal(m)
