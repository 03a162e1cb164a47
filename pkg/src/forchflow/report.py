"""Matplotlib figures rendered alongside the delimited run outputs."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def energy_bound_figure(path, rows):
    """Semilog plot of V(t) against its exponential bound."""
    t = np.array([r.t for r in rows])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(t, [r.V for r in rows], label="V(t)", color="tab:blue")
    ax.semilogy(
        t, [r.V_bound for r in rows], label="V(0) exp(C3 t)",
        color="tab:red", linestyle="--",
    )
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fields_figure(path, grid, t, u, v):
    """Side-by-side heatmaps of the two densities at one time."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    extent = (0.0, grid.lx, 0.0, grid.ly)
    for ax, field, name in ((axes[0], u, "active u"), (axes[1], v, "passive v")):
        im = ax.imshow(
            np.asarray(field).T, origin="lower", extent=extent, aspect="auto"
        )
        ax.set_title(f"{name} at t={t:g}")
        fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def convergence_figure(path, levels_x, errors, labels, xlabel):
    """Log-log error decay plot for a refinement ladder."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for errs, label in zip(errors, labels):
        ax.loglog(levels_x, errs, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("L2 error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
