"""Error metrics of the multiscale solution against the fine reference.

Velocity errors integrate the RT0 difference field exactly with the 3-point
edge-midpoint rule; pressure errors compare coarse-cell averages in L2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


def kappa_weighted_norm(mesh, kappa, u):
    """Exact kappa^{-1}-weighted L2 norm of an RT0 flux-DOF vector."""
    p = mesh.nodes[mesh.cells]  # (m, 3, 2)
    mids = (p.sum(axis=1, keepdims=True) - p) / 2.0
    coef = mesh.cell_edge_signs * u[mesh.cell_edges] / (2.0 * mesh.areas[:, None])
    # velocity at the three edge midpoints of each cell
    v = np.einsum("ma,mlax->mlx", coef, mids[:, :, None, :] - p[:, None, :, :])
    cellwise = np.einsum("mlx,mlx->m", v, v) * mesh.areas / 3.0
    return float(np.sqrt(np.sum(cellwise / kappa.values)))


def velocity_error(mesh, kappa, u_ref, u_ms):
    """Relative weighted-L2 velocity error in percent."""
    ref = kappa_weighted_norm(mesh, kappa, u_ref)
    if ref == 0.0:
        raise ValueError("reference velocity norm is zero")
    return 100.0 * kappa_weighted_norm(mesh, kappa, u_ms - u_ref) / ref


def coarse_average_pressure(mesh, partition, p_fine):
    """Area-weighted average of a fine P0 pressure per coarse cell."""
    areas = np.bincount(
        partition.cell_to_coarse, weights=mesh.areas,
        minlength=partition.n_coarse_cells,
    )
    mass = np.bincount(
        partition.cell_to_coarse, weights=mesh.areas * p_fine,
        minlength=partition.n_coarse_cells,
    )
    return mass / areas


def pressure_error(mesh, partition, p_fine, P_H):
    """Relative coarse-grid pressure L2 error in percent.

    When the reference coarse pressure vanishes the absolute norm is
    reported instead (with a warning), as for the zero-mean source case.
    """
    p_bar = coarse_average_pressure(mesh, partition, p_fine)
    areas = partition.coarse_areas(mesh)
    err = float(np.sqrt(np.sum(areas * (P_H - p_bar) ** 2)))
    ref = float(np.sqrt(np.sum(areas * p_bar**2)))
    scale = np.abs(p_fine).max(initial=0.0)
    if ref <= 1e-14 * (1.0 + scale):
        warnings.warn(
            "zero reference coarse pressure; reporting absolute L2 norm",
            stacklevel=2,
        )
        return 100.0 * err
    return 100.0 * err / ref


@dataclass
class ErrorReport:
    """One row of the experiment tables."""

    geometry: str
    test: str
    M: int
    DOF_c: int
    DOF_f: int
    e_u_h_pct: float
    e_p_H_pct: float
    Lambda: float
    beta_H: float


@dataclass
class Theorem2Table:
    """Velocity-error decay against the first discarded eigenvalue."""

    rows: list  # (M, e_u_h_pct, inv_Lambda, ratio)
    monotone: bool
    fitted_C: float


def theorem2_diagnostic(entries):
    """Build the decay table from ``(M, e_u_h_pct, Lambda)`` sweep entries.

    ``ratio`` is e_u_h / Lambda^{-1}; ``fitted_C`` is the smallest single
    constant bounding the sweep (0 when every Lambda is infinite).
    """
    entries = sorted(entries, key=lambda t: t[0])
    rows = []
    for M, e_u, lam in entries:
        inv = 0.0 if np.isinf(lam) else 1.0 / lam
        ratio = e_u / inv if inv > 0.0 else np.inf if e_u > 0.0 else 0.0
        rows.append((M, e_u, inv, ratio))
    errs = [r[1] for r in rows]
    monotone = all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    finite = [r[3] for r in rows if np.isfinite(r[3])]
    return Theorem2Table(
        rows=rows, monotone=monotone, fitted_C=max(finite, default=0.0)
    )
