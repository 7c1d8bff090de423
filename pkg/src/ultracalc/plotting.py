"""Figures written next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGSIZE = (6.0, 4.0)


def _save(fig, path) -> None:
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_ultrafunction(u, path, title: str | None = None) -> None:
    grid = u.grid
    fig, ax = plt.subplots(figsize=FIGSIZE)
    if grid.dim == 1:
        edges = grid.origin[0] + np.arange(grid.extent[0] + 1) * grid.h
        ax.stairs(u.coeffs, edges, color="k", lw=1.2)
        ax.set_xlabel("x")
        ax.set_ylabel("value")
    elif grid.dim == 2:
        xe = grid.origin[0] + np.arange(grid.extent[0] + 1) * grid.h
        ye = grid.origin[1] + np.arange(grid.extent[1] + 1) * grid.h
        mesh = ax.pcolormesh(xe, ye, u.coeffs.T, shading="flat", cmap="viridis")
        fig.colorbar(mesh, ax=ax)
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    else:
        # middle slice along the last axis
        mid = grid.extent[-1] // 2
        mesh = ax.imshow(u.coeffs[..., mid].T, origin="lower", cmap="viridis")
        fig.colorbar(mesh, ax=ax)
        ax.set_xlabel("i")
        ax.set_ylabel("j")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_snapshots(times, snapshots, path, max_curves: int = 8) -> None:
    """Overlay of 1-d snapshots (2-d and up: first and last only)."""
    grid = snapshots[0].grid
    if grid.dim != 1:
        plot_ultrafunction(snapshots[-1], path, title=f"t = {times[-1]:.4g}")
        return
    picks = np.unique(np.linspace(0, len(snapshots) - 1, min(max_curves, len(snapshots))).astype(int))
    fig, ax = plt.subplots(figsize=FIGSIZE)
    x = grid.centers[..., 0]
    colors = plt.cm.viridis(np.linspace(0, 1, len(picks)))
    for c, k in zip(colors, picks):
        ax.plot(x, snapshots[k].coeffs, color=c, lw=1.0, label=f"t={times[k]:.3g}")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.legend(fontsize=7, frameon=False)
    _save(fig, path)


def plot_conservation(t, q, residual, path) -> None:
    t = np.asarray(t)
    q = np.asarray(q)
    drift = np.abs(q - q[0]) / max(abs(q[0]), np.finfo(float).tiny)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)
    ax1.semilogy(t, np.maximum(drift, 1e-18), "k.-", ms=3)
    ax1.set_ylabel(r"$|Q(t)-Q(0)|/|Q(0)|$")
    ax2.semilogy(t, np.maximum(np.asarray(residual), 1e-20), "b.-", ms=3)
    ax2.set_ylabel("region flux residual")
    ax2.set_xlabel("t")
    _save(fig, path)


def plot_refinement(table, path) -> None:
    h = np.asarray(table.h)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    if table.kind == "error":
        ax.loglog(h, np.abs(table.values), "ko-", label=table.functional)
        ref = np.abs(table.values[0]) * (h / h[0]) ** 2
        ax.loglog(h, ref, "k--", lw=0.8, label=r"$O(h^2)$")
    else:
        diffs = [abs(d) for d in table.differences[1:]]
        if any(d > 0 for d in diffs):
            ax.loglog(h[1:], np.maximum(diffs, 1e-300), "ko-", label="|successive difference|")
        else:
            ax.semilogx(h, table.values, "ko-", label=table.functional)
    ax.set_xlabel("h")
    ax.legend(frameon=False)
    _save(fig, path)
