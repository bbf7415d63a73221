"""Batch command-line entry point.

Four subcommands drive the library end to end on a config file:

  solve     phantom -> measurements -> conditional-gradient reconstruction
  cheeger   mesh relaxation + polygonal ascent on a weight field
  baseline  fixed-grid total-variation reconstruction of the same data
  radial    analytic single-measurement tables (and optional full pipeline)

Each run writes delimited outputs (CSV/JSON/PGM) plus PNG figures into the
output directory.  Exit codes: 0 ok, 2 config error, 3 degenerate solve,
4 profile assumption violated.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import fileio, report
from .cheeger import cheeger_objective, optimality_residual, refine
from .config import (
    RunConfig,
    build_fw_config,
    build_grid_config,
    build_operator,
    build_phantom,
    build_quad,
    build_refine_config,
    lambda_value,
    load_config,
    draw_noise,
)
from .errors import (
    AssumptionViolated,
    ConfigError,
    DegenerateAngle,
    NoContourFound,
    PolyTVError,
    QuadratureNotConverged,
    ResampleBrokeSimplicity,
    StalledAtNonSimple,
)
from .geometry import perimeter, shoelace_area
from .grid import (
    auto_half_width,
    discretize_field,
    extract_polygon,
    fixed_grid_objective,
    solve_fixed_grid_tv,
    solve_relaxed_cheeger,
)
from .operator import Measurements, dual_field, forward
from .radial import (
    G,
    R_star,
    RadialProfile,
    amplitude_closed_form,
    gaussian_profile,
    radial_table,
)
from .sparse import frank_wolfe, objective

_DEGENERATE = (
    NoContourFound,
    DegenerateAngle,
    StalledAtNonSimple,
    ResampleBrokeSimplicity,
    QuadratureNotConverged,
)


def _say(quiet: bool, msg: str) -> None:
    if not quiet:
        print(msg)


def _observations(cfg: RunConfig, op, quad, seed_override):
    """Phantom, clean measurements, and the noisy observation vector."""
    u0 = build_phantom(cfg)
    y0 = forward(op, u0, quad).values if u0.atoms else np.zeros(op.m)
    w = draw_noise(cfg, op.m, seed_override)
    return u0, Measurements(y0 + w)


def _mesh_half_width(cfg_hw, op, y_values, fallback: float) -> float:
    if cfg_hw is not None:
        return cfg_hw
    if np.linalg.norm(y_values) > 0:
        return auto_half_width(dual_field(op, y_values))
    return fallback


def _atom_rows(u):
    for atom in u.atoms:
        yield {
            "amplitude": atom.amplitude,
            "n_vertices": int(atom.support.n),
            "perimeter": perimeter(atom.support),
            "area": abs(shoelace_area(atom.support.vertices)),
        }


def cmd_solve(cfg: RunConfig, outdir: str, quiet: bool, seed_override=None) -> int:
    op = build_operator(cfg)
    quad = build_quad(cfg)
    u0, y = _observations(cfg, op, quad, seed_override)
    lam = lambda_value(cfg, op.m)
    grid_cfg = build_grid_config(cfg)
    u, trace = frank_wolfe(
        op, y, build_fw_config(cfg, lam), grid_cfg,
        build_refine_config(cfg, oracle=True), quad,
    )
    obj = objective(u, op, y, lam, quad)

    fileio.write_measurements_csv(os.path.join(outdir, "measurements.csv"), y.values)
    fileio.write_polygons_csv(
        os.path.join(outdir, "atoms.csv"), [a.support for a in u.atoms]
    )
    fileio.write_csv(
        os.path.join(outdir, "trace.csv"),
        ["k", "objective", "tv", "residual_norm", "cheeger_ratio", "n_atoms"],
        (
            (r.k, r.objective, r.tv, r.residual_norm, r.cheeger_ratio, r.n_atoms)
            for r in trace.records
        ),
    )
    fileio.write_json(
        os.path.join(outdir, "summary.json"),
        {
            "lambda": lam,
            "iterations": trace.iterations,
            "stopped_by": trace.stopped_by,
            "final_objective": obj,
            "atoms": list(_atom_rows(u)),
        },
    )
    hw = _mesh_half_width(cfg.grid_half_width, op, y.values, cfg.operator_half_width)
    raster = u.rasterize(hw, cfg.grid_n_cells)
    fileio.write_grid_csv(os.path.join(outdir, "reconstruction.csv"), raster.values)
    fileio.write_pgm(os.path.join(outdir, "reconstruction.pgm"), raster.values)
    report.save_atoms_figure(
        os.path.join(outdir, "reconstruction.png"), u, hw, "reconstruction"
    )
    report.save_trace_figure(os.path.join(outdir, "trace.png"), trace)
    _say(
        quiet,
        f"solve: {len(u.atoms)} atoms, objective {obj:.6g}, "
        f"stopped by {trace.stopped_by} after {trace.iterations} iterations",
    )
    return 0


def _cheeger_field(cfg: RunConfig):
    """Weight field for the cheeger command: named preset or coefficients."""
    if cfg.cheeger_coefficients is not None:
        op = build_operator(cfg)
        coeffs = np.asarray(cfg.cheeger_coefficients, dtype=float)
        if coeffs.shape != (op.m,):
            raise ConfigError(
                f"cheeger.coefficients needs {op.m} values, got {coeffs.size}"
            )
        return dual_field(op, coeffs)
    if cfg.cheeger_preset == "gaussian":
        from .operator import GaussianOperator

        op = GaussianOperator(centers=np.zeros((1, 2)), sigma=cfg.cheeger_sigma)
        return dual_field(op, np.array([1.0]))
    raise ConfigError(f"unknown cheeger.preset {cfg.cheeger_preset!r}")


def cmd_cheeger(cfg: RunConfig, outdir: str, quiet: bool, seed_override=None) -> int:
    quad = build_quad(cfg)
    field = _cheeger_field(cfg)
    hw = cfg.grid_half_width if cfg.grid_half_width is not None else auto_half_width(field)
    grid_cfg = build_grid_config(cfg)
    gf = discretize_field(field, hw, grid_cfg.n_cells, quad)
    u = solve_relaxed_cheeger(gf, grid_cfg.pd)
    poly0, eps = extract_polygon(u, field, grid_cfg.n_vertices, quad)
    j_mesh = cheeger_objective(poly0, field, quad)
    rows: list = []
    refined = refine(poly0, field, build_refine_config(cfg), quad, trace=rows)
    j_refined = cheeger_objective(refined, field, quad)
    resid = optimality_residual(refined, field, quad)

    fileio.write_polygons_csv(os.path.join(outdir, "polygon.csv"), [refined])
    fileio.write_polygons_csv(os.path.join(outdir, "mesh_polygon.csv"), [poly0])
    fileio.write_csv(
        os.path.join(outdir, "refine_trace.csv"),
        ["iter", "J", "step", "grad_norm"],
        rows,
    )
    fileio.write_json(
        os.path.join(outdir, "cheeger_summary.json"),
        {
            "J_mesh": j_mesh,
            "J_refined": j_refined,
            "optimality_residual": resid,
            "epsilon": int(eps),
            "n_vertices": int(refined.n),
            "mesh_converged": bool(u.converged),
        },
    )
    report.save_polygon_figure(
        os.path.join(outdir, "cheeger.png"),
        u.values,
        u.half_width,
        refined.vertices,
        f"J mesh {j_mesh:.6g} -> refined {j_refined:.6g}",
    )
    _say(
        quiet,
        f"cheeger: J {j_mesh:.6g} -> {j_refined:.6g}, residual {resid:.3g}",
    )
    return 0


def cmd_baseline(cfg: RunConfig, outdir: str, quiet: bool, seed_override=None) -> int:
    op = build_operator(cfg)
    quad = build_quad(cfg)
    u0, y = _observations(cfg, op, quad, seed_override)
    lam = lambda_value(cfg, op.m)
    hw = _mesh_half_width(cfg.baseline_half_width, op, y.values, cfg.operator_half_width)
    grid_cfg = build_grid_config(cfg)
    ug = solve_fixed_grid_tv(op, y, lam, hw, cfg.baseline_n_cells, grid_cfg.pd)
    obj = fixed_grid_objective(op, y, lam, ug)

    fileio.write_measurements_csv(os.path.join(outdir, "measurements.csv"), y.values)
    fileio.write_grid_csv(os.path.join(outdir, "baseline_grid.csv"), ug.values)
    fileio.write_pgm(os.path.join(outdir, "baseline.pgm"), ug.values)
    fileio.write_json(
        os.path.join(outdir, "baseline_summary.json"),
        {
            "lambda": lam,
            "objective": obj,
            "n_cells": int(ug.n_cells),
            "half_width": ug.half_width,
            "converged": bool(ug.converged),
        },
    )
    report.save_grid_figure(
        os.path.join(outdir, "baseline.png"),
        ug.values,
        ug.half_width,
        f"fixed-grid reconstruction, objective {obj:.6g}",
    )
    _say(quiet, f"baseline: objective {obj:.6g} on {ug.n_cells}x{ug.n_cells} cells")
    return 0


def _radial_profile(cfg: RunConfig) -> RadialProfile:
    if cfg.radial_profile == "gaussian":
        return gaussian_profile(cfg.radial_sigma)
    if cfg.radial_profile == "increasing":
        # deliberately violates the monotone-profile assumption (error path)
        return RadialProfile(g=lambda r: 1.0 + r, sigma=cfg.radial_sigma)
    raise ConfigError(f"unknown radial.profile {cfg.radial_profile!r}")


def cmd_radial(cfg: RunConfig, outdir: str, quiet: bool, seed_override=None) -> int:
    profile = _radial_profile(cfg)
    rows = radial_table(profile, cfg.radial_n_values)
    rs = R_star(profile)
    fileio.write_csv(
        os.path.join(outdir, "radial.csv"),
        ["n", "R_star_n", "G_n(R_star_n)", "abs_err_vs_R_star"],
        rows,
    )
    report.save_radial_figure(os.path.join(outdir, "radial.png"), rows, rs)
    _say(quiet, f"radial: R* = {rs:.8f}, table for n in {cfg.radial_n_values}")
    if not cfg.radial_full_pipeline:
        return 0

    from .operator import GaussianOperator

    op = GaussianOperator(centers=np.zeros((1, 2)), sigma=cfg.radial_sigma)
    y = Measurements(np.array([cfg.radial_y]))
    lam = cfg.radial_lambda
    quad = build_quad(cfg)
    u, trace = frank_wolfe(
        op, y, build_fw_config(cfg, lam), build_grid_config(cfg),
        build_refine_config(cfg), quad,
    )
    s = cfg.radial_sigma
    q_disk = 2.0 * np.pi * s * s * (1.0 - np.exp(-0.5 * (rs / s) ** 2))
    a_star = amplitude_closed_form(cfg.radial_y, lam, q_disk, 2.0 * np.pi * rs)
    result = {
        "n_atoms": len(u.atoms),
        "stopped_by": trace.stopped_by,
        "amplitude_closed_form": a_star,
        "radius_target": rs,
    }
    if u.atoms:
        a = u.atoms[0].amplitude
        radii = np.linalg.norm(u.atoms[0].support.vertices, axis=1)
        result["amplitude"] = a
        result["amplitude_rel_err"] = abs(a - a_star) / max(abs(a_star), 1e-300)
        result["radius_mean"] = float(radii.mean())
        result["radius_rel_err"] = abs(float(radii.mean()) - rs) / rs
        fileio.write_polygons_csv(
            os.path.join(outdir, "radial_atom.csv"), [u.atoms[0].support]
        )
    fileio.write_json(os.path.join(outdir, "radial_summary.json"), result)
    if u.atoms:
        _say(
            quiet,
            f"radial pipeline: amplitude error {result['amplitude_rel_err']:.3g}, "
            f"radius error {result['radius_rel_err']:.3g}",
        )
    else:
        _say(quiet, "radial pipeline: zero reconstruction (sub-threshold data)")
    return 0


_COMMANDS = {
    "solve": cmd_solve,
    "cheeger": cmd_cheeger,
    "baseline": cmd_baseline,
    "radial": cmd_radial,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polytv",
        description="Off-the-grid TV reconstruction with polygonal atoms",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True, help="path to the run config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="noise seed override")
        p.add_argument("--quiet", action="store_true", help="suppress stdout chatter")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        outdir = args.out if args.out is not None else cfg.out_dir
        fileio.ensure_dir(outdir)
        return _COMMANDS[args.command](cfg, outdir, args.quiet, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _DEGENERATE as exc:
        print(f"degenerate solve: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except AssumptionViolated as exc:
        print(f"profile assumption violated: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
