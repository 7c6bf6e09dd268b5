"""File-output figure rendering for the diagnose pipeline."""

from __future__ import annotations

from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import QuadratureGrid, _axis_nodes, _cell_masses
from .potential import PotentialSpec

__all__ = ["render_kl_decay", "render_density_overlay"]


def render_kl_decay(rows, out_path: str) -> Optional[str]:
    """Semilog plot of the measured KL trajectory; returns the path written,
    or None when no row carries a KL value."""
    ks = [r["k"] for r in rows if r.get("kl") is not None]
    kls = [max(r["kl"], 1e-300) for r in rows if r.get("kl") is not None]
    if not ks:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, kls, marker="o", lw=1.2)
    ax.set_yscale("log")
    if ks[0] > 0 and max(ks) / max(ks[0], 1) >= 64:
        ax.set_xscale("log")
    ax.set_xlabel("step k")
    ax.set_ylabel("KL to target")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_density_overlay(
    samples: np.ndarray,
    spec: PotentialSpec,
    grid: QuadratureGrid,
    out_path: str,
    k: Optional[int] = None,
) -> str:
    """Sample histogram against the quadrature-normalized target (d <= 2)."""
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    title = f"ensemble at k={k}" if k is not None else "ensemble"
    fig, ax = plt.subplots(figsize=(6, 4))
    if grid.dim == 1:
        edges = grid.edges(0)
        ax.hist(
            pts[:, 0], bins=edges, density=True, alpha=0.45, label="samples"
        )
        xs, _, _ = _axis_nodes(grid, 0)
        dens = np.exp(-np.asarray(spec.value(xs[:, None]), dtype=float))
        width = np.diff(edges).mean()
        masses = _cell_masses(spec, grid)
        dens = dens / (masses.sum())
        ax.plot(xs, dens, "k-", lw=1.5, label="target")
        ax.set_xlabel("x")
        ax.set_ylabel("density")
        ax.legend()
        lo = max(grid.lo[0], pts[:, 0].min() - 2 * width)
        hi = min(grid.hi[0], pts[:, 0].max() + 2 * width)
        ax.set_xlim(lo, hi)
    else:
        h = ax.hist2d(
            pts[:, 0],
            pts[:, 1],
            bins=grid.bins,
            range=[(grid.lo[0], grid.hi[0]), (grid.lo[1], grid.hi[1])],
            cmap="viridis",
        )
        fig.colorbar(h[3], ax=ax, label="counts")
        xs, _, _ = _axis_nodes(grid, 0)
        ys, _, _ = _axis_nodes(grid, 1)
        step = max(1, len(xs) // 200)
        X, Y = np.meshgrid(xs[::step], ys[::step], indexing="ij")
        U = np.asarray(
            spec.value(np.column_stack([X.ravel(), Y.ravel()])), dtype=float
        ).reshape(X.shape)
        ax.contour(X, Y, np.exp(-U), levels=6, colors="w", linewidths=0.7)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
