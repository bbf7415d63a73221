"""Figure rendering for the command-line reports (Agg backend, PNG files).

Figures are a visual companion to the delimited outputs; exact values always
live in the CSV/JSON files next to them.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sparse import AtomicFunction, FWTrace


def _close_loop(vertices: np.ndarray) -> np.ndarray:
    return np.vstack([vertices, vertices[:1]])


def save_atoms_figure(path: str, u: AtomicFunction, half_width: float, title: str) -> None:
    """Rasterized atomic function with polygon boundaries overlaid."""
    fig, ax = plt.subplots(figsize=(5.4, 5.0))
    if u.atoms:
        gf = u.rasterize(half_width, 256)
        r = gf.half_width
        vmax = np.abs(gf.values).max() or 1.0
        ax.imshow(
            gf.values.T,
            origin="lower",
            extent=(-r, r, -r, r),
            cmap="RdBu_r",
            vmin=-vmax,
            vmax=vmax,
        )
        for atom in u.atoms:
            loop = _close_loop(atom.support.vertices)
            ax.plot(loop[:, 0], loop[:, 1], "k-", lw=0.9)
    else:
        ax.text(0.5, 0.5, "zero function", ha="center", va="center", transform=ax.transAxes)
        ax.set_xlim(-half_width, half_width)
        ax.set_ylim(-half_width, half_width)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_trace_figure(path: str, trace: FWTrace) -> None:
    """Objective and Cheeger-ratio trajectory of the outer loop."""
    ks = [r.k for r in trace.records]
    obj = [r.objective for r in trace.records]
    ratio = [r.cheeger_ratio for r in trace.records]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.6, 3.4))
    ax1.plot(ks, obj, "o-")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("objective")
    ax2.plot(ks, ratio, "o-")
    ax2.axhline(1.0, color="k", lw=0.7, ls="--")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("best Cheeger ratio")
    fig.suptitle(f"stopped by {trace.stopped_by}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_grid_figure(path: str, values: np.ndarray, half_width: float, title: str) -> None:
    fig, ax = plt.subplots(figsize=(5.4, 5.0))
    vmax = np.abs(values).max() or 1.0
    r = half_width
    ax.imshow(
        values.T,
        origin="lower",
        extent=(-r, r, -r, r),
        cmap="RdBu_r",
        vmin=-vmax,
        vmax=vmax,
    )
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_polygon_figure(
    path: str, values: np.ndarray, half_width: float, vertices: np.ndarray, title: str
) -> None:
    """Mesh-stage image with the extracted/refined polygon on top."""
    fig, ax = plt.subplots(figsize=(5.4, 5.0))
    vmax = np.abs(values).max() or 1.0
    r = half_width
    ax.imshow(
        values.T,
        origin="lower",
        extent=(-r, r, -r, r),
        cmap="RdBu_r",
        vmin=-vmax,
        vmax=vmax,
    )
    loop = _close_loop(vertices)
    ax.plot(loop[:, 0], loop[:, 1], "k-", lw=1.2)
    ax.plot(vertices[:, 0], vertices[:, 1], "k.", ms=3.5)
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_radial_figure(path: str, rows, r_star: float) -> None:
    """R*_n against n with the continuum radius as reference."""
    ns = [r[0] for r in rows]
    rstars = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(5.4, 3.6))
    ax.plot(ns, rstars, "o-", label="optimal polygon radius")
    ax.axhline(r_star, color="k", lw=0.8, ls="--", label="disk radius")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("vertex count n")
    ax.set_ylabel("radius")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
