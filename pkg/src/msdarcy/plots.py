"""Figure rendering for the experiment reports (written next to the CSVs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import matplotlib.tri as mtri
import numpy as np


def convergence_figure(reports, path):
    """Semilog decay of the velocity and pressure errors against the number
    of basis functions per coarse edge."""
    M = [r.M for r in reports]
    e_u = [max(r.e_u_h_pct, 1e-12) for r in reports]
    e_p = [max(r.e_p_H_pct, 1e-12) for r in reports]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.semilogy(M, e_u, "o-", label=r"velocity error $e_u^h$")
    ax.semilogy(M, e_p, "s--", label=r"pressure error $e_p^H$")
    ax.set_xlabel("basis functions per coarse edge $M$")
    ax.set_ylabel("relative error, %")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def solution_figure(mesh, cell_pressure, cell_velocity, path, title=""):
    """Cell pressure as a filled triangulation plus a thinned velocity quiver."""
    tri = mtri.Triangulation(
        mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.cells
    )
    fig, (ax_p, ax_u) = plt.subplots(
        2, 1, figsize=(7.0, 4.0), sharex=True, sharey=True
    )
    tpc = ax_p.tripcolor(tri, facecolors=np.asarray(cell_pressure), cmap="viridis")
    fig.colorbar(tpc, ax=ax_p, label="pressure")
    ax_p.set_title(title)

    v = np.asarray(cell_velocity)
    step = max(1, len(v) // 800)
    idx = np.arange(0, len(v), step)
    speed = np.hypot(v[:, 0], v[:, 1])
    spc = ax_u.tripcolor(tri, facecolors=speed, cmap="magma")
    fig.colorbar(spc, ax=ax_u, label="|velocity|")
    ax_u.quiver(
        mesh.centroids[idx, 0], mesh.centroids[idx, 1],
        v[idx, 0], v[idx, 1], color="white", width=0.002, scale_units="width",
    )
    for ax in (ax_p, ax_u):
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
