"""Lowest-order Raviart-Thomas / piecewise-constant saddle-point solver.

Velocity DOFs are integrated normal fluxes with respect to each edge's
canonical normal, which makes every divergence-matrix entry +-1. The
assembled (1,1) block is the positive definite variant of the mass form, so
the first block equation reads ``A u - B^T p = G``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import INLET, OUTLET, WALL


class SolveError(Exception):
    """Singular or ill-posed linear system, or residual above tolerance."""


@dataclass
class SaddleSystem:
    """Blocks of [[A, -B^T], [B, 0]] with right-hand sides G (velocity) and
    F (pressure). ``constrained`` marks flux DOFs eliminated to zero."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    G: np.ndarray
    F: np.ndarray
    constrained: np.ndarray = field(default=None)

    @property
    def n_velocity(self):
        return self.A.shape[0]

    @property
    def n_pressure(self):
        return self.B.shape[0]


@dataclass
class FlowSolution:
    u: np.ndarray
    p: np.ndarray
    residual_momentum: float
    residual_mass: float


def rt0_mass_matrix(mesh, kappa):
    """Exact kappa^{-1}-weighted RT0 mass matrix (no constraints applied)."""
    p = mesh.nodes[mesh.cells]  # (m, 3, 2)
    mids = (p.sum(axis=1, keepdims=True) - p) / 2.0  # midpoint opposite vertex l
    diff = mids[:, :, None, :] - p[:, None, :, :]  # (m, l, a, 2)
    local = np.einsum("mlax,mlbx->mab", diff, diff)
    signs = mesh.cell_edge_signs
    coef = 1.0 / (kappa.values * 12.0 * mesh.areas)
    local = local * signs[:, :, None] * signs[:, None, :] * coef[:, None, None]

    rows = np.broadcast_to(mesh.cell_edges[:, :, None], local.shape)
    cols = np.broadcast_to(mesh.cell_edges[:, None, :], local.shape)
    A = sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())),
        shape=(mesh.n_edges, mesh.n_edges),
    )
    return A.tocsr()


def divergence_matrix(mesh):
    """Cells-by-edges matrix of signed unit entries: row K integrates the
    divergence of each incident flux DOF over K."""
    rows = np.repeat(np.arange(mesh.n_cells), 3)
    cols = mesh.cell_edges.ravel()
    vals = mesh.cell_edge_signs.ravel()
    B = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_cells, mesh.n_edges))
    return B.tocsr()


def divdiv_matrix(mesh):
    """Edge-by-edge Gram matrix of the div-div form."""
    B = divergence_matrix(mesh)
    W = sp.diags(1.0 / mesh.areas)
    return (B.T @ W @ B).tocsr()


def hdiv_form_matrix(mesh, kappa):
    """Gram matrix of the H(div) form: kappa^{-1} mass plus div-div."""
    return (rt0_mass_matrix(mesh, kappa) + divdiv_matrix(mesh)).tocsr()


def boundary_outward_signs(mesh, edges):
    """+1 where the canonical normal of a boundary edge points out of the
    domain, -1 otherwise."""
    cells = mesh.cells_of_edge[edges, 0]
    signs = np.empty(len(edges))
    for k, (e, c) in enumerate(zip(edges, cells)):
        local = np.flatnonzero(mesh.cell_edges[c] == e)[0]
        signs[k] = mesh.cell_edge_signs[c, local]
    return signs


def assemble_fine(mesh, kappa, bc, source=0.0):
    """Assemble the fine saddle system for boundary pressures
    ``bc = {"p1": inlet, "p2": outlet}`` and a per-cell (or scalar) source."""
    A = rt0_mass_matrix(mesh, kappa)
    B = divergence_matrix(mesh)

    G = np.zeros(mesh.n_edges)
    for tag, key in ((INLET, "p1"), (OUTLET, "p2")):
        edges = mesh.boundary_edges(tag)
        if len(edges):
            G[edges] = -float(bc[key]) * boundary_outward_signs(mesh, edges)

    f = np.broadcast_to(np.asarray(source, dtype=float), (mesh.n_cells,))
    F = f * mesh.areas

    constrained = mesh.edge_tags == WALL
    free = sp.diags((~constrained).astype(float))
    A = (free @ A @ free + sp.diags(constrained.astype(float))).tocsr()
    B = (B @ free).tocsr()
    B.eliminate_zeros()
    G = np.where(constrained, 0.0, G)
    return SaddleSystem(A=A, B=B, G=G, F=F, constrained=constrained)


def solve_saddle(system, tol=1e-10):
    """Direct factorization of the full indefinite block system.

    In pure-Neumann mode (no free inlet/outlet DOFs) the source must be
    compatible and the constant pressure mode is pinned by a zero-mean
    multiplier.
    """
    A, B = system.A, system.B
    n_u, n_p = system.n_velocity, system.n_pressure
    constrained = system.constrained
    if constrained is None:
        constrained = np.zeros(n_u, dtype=bool)

    # pure Neumann iff the constant pressure is in the nullspace of B^T over
    # free DOFs, i.e. every signed column sum of B vanishes there
    colsum = np.abs(np.asarray(B.sum(axis=0)).ravel())
    scale = np.abs(B).max() if B.nnz else 0.0
    pure_neumann = colsum[~constrained].max(initial=0.0) <= 1e-9 * scale

    rhs = np.concatenate([system.G, system.F])
    if pure_neumann:
        total = float(np.sum(system.F))
        scale = np.abs(system.F).sum()
        if abs(total) > tol * (1.0 + scale):
            raise SolveError(
                f"pure-Neumann system with incompatible source (sum F = {total:g})"
            )
        w = sp.csr_matrix(np.ones((n_p, 1)))
        K = sp.bmat(
            [[A, B.T, None], [B, None, w], [None, w.T, None]], format="csc"
        )
        rhs = np.concatenate([rhs, [0.0]])
    else:
        K = sp.bmat([[A, B.T], [B, None]], format="csc")

    try:
        lu = splu(K)
    except RuntimeError as exc:
        raise SolveError(f"saddle factorization failed: {exc}") from exc
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SolveError("saddle solve produced non-finite values")

    u = x[:n_u]
    p = -x[n_u:n_u + n_p]
    u[constrained] = 0.0

    res_mom = np.linalg.norm(A @ u - B.T @ p - system.G)
    res_mass = np.linalg.norm(B @ u - system.F)
    limit = tol * (1.0 + np.linalg.norm(rhs))
    if res_mom > limit or res_mass > limit:
        raise SolveError(
            f"saddle residuals above tolerance "
            f"(momentum {res_mom:.3e}, mass {res_mass:.3e}, limit {limit:.3e})"
        )
    return FlowSolution(u=u, p=p, residual_momentum=res_mom, residual_mass=res_mass)


def cell_velocities(mesh, u):
    """RT0 field evaluated at every cell centroid, shape (n_cells, 2)."""
    p = mesh.nodes[mesh.cells]
    centroid = mesh.centroids
    coef = mesh.cell_edge_signs * u[mesh.cell_edges] / (2.0 * mesh.areas[:, None])
    return np.einsum("ml,mlx->mx", coef, centroid[:, None, :] - p)


def evaluate_cell_velocity(mesh, u, cell):
    """Centroid value of the RT0 field on one cell."""
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell {cell} out of range")
    p = mesh.nodes[mesh.cells[cell]]
    centroid = p.mean(axis=0)
    coef = mesh.cell_edge_signs[cell] * u[mesh.cell_edges[cell]]
    return (coef[:, None] * (centroid[None, :] - p)).sum(axis=0) / (
        2.0 * mesh.areas[cell]
    )
