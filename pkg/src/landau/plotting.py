"""Figures for a finished run, rendered off-screen to PNG files."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure


def diagnostics_figure(initial, records, path) -> Path:
    """Six panels of monitored functionals against time."""
    recs = ([initial] if initial is not None else []) + list(records)
    t = np.array([r.time for r in recs])
    col = lambda name: np.array([getattr(r, name) for r in recs])  # noqa: E731
    mass = col("mass")
    fig = Figure(figsize=(10, 6.5), layout="constrained")
    axes = fig.subplots(2, 3, sharex=True).ravel()
    axes[0].plot(t, (mass - mass[0]) / (mass[0] if mass[0] else 1.0))
    axes[0].set_ylabel("relative mass drift")
    axes[1].plot(t, col("energy"))
    axes[1].set_ylabel("energy")
    axes[2].plot(t, col("entropy"))
    axes[2].set_ylabel("entropy")
    axes[3].plot(t, col("fisher"))
    axes[3].set_ylabel("weighted Fisher information")
    axes[4].plot(t, col("lq"))
    axes[4].set_ylabel("L^q norm on ball")
    axes[5].plot(t, col("ellip_c"), label="c_min")
    axes[5].plot(t, col("ellip_C"), label="C_max")
    axes[5].set_ylabel("ellipticity")
    axes[5].legend(frameon=False)
    for ax in axes[3:]:
        ax.set_xlabel("t")
    for ax in axes:
        ax.ticklabel_format(axis="y", style="sci", scilimits=(-3, 3), useOffset=False)
    path = Path(path)
    fig.savefig(path, dpi=110)
    return path


def slices_figure(snapshots, path) -> Path:
    """The v3 = 0 plane of the first and last snapshot and their difference."""
    first, last = snapshots[0], snapshots[-1]
    grid = first.grid
    mid = grid.n // 2
    ext = (-grid.L, grid.L, -grid.L, grid.L)
    fig = Figure(figsize=(12, 4), layout="constrained")
    axes = fig.subplots(1, 3)
    panels = (
        (first.values[:, :, mid], f"f at t={first.time:.4g}"),
        (last.values[:, :, mid], f"f at t={last.time:.4g}"),
        (last.values[:, :, mid] - first.values[:, :, mid], "difference"),
    )
    for ax, (img, title) in zip(axes, panels):
        im = ax.imshow(img.T, origin="lower", extent=ext, cmap="viridis" if title != "difference" else "RdBu_r")
        ax.set_title(title)
        ax.set_xlabel("v1")
        ax.set_ylabel("v2")
        fig.colorbar(im, ax=ax, shrink=0.8)
    path = Path(path)
    fig.savefig(path, dpi=110)
    return path
